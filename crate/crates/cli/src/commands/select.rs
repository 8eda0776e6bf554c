use batchlab::calibration::{select_sample_paths, SelectedPath, TreatmentKind};
use clap::Args;
use serde::{Deserialize, Serialize};

use crate::output::table;
use crate::{Context, Outcome, Usage};

#[derive(Args, Debug)]
pub struct SelectArgs {
    /// Largest allowed gap between realized and expected strength, in points.
    #[arg(long, default_value_t = 2.0)]
    pub tolerance: f64,
    /// Candidate paths, seeds `seed .. seed + n`.
    #[arg(long, default_value_t = 10_000)]
    pub n: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SelectReport {
    pub tolerance: f64,
    pub first_seed: u64,
    pub candidates: usize,
    pub paths: Vec<SelectedPath>,
}

pub fn run(ctx: &Context, args: &SelectArgs) -> anyhow::Result<Outcome> {
    if !(args.tolerance >= 0.0) {
        return Err(Usage(format!("--tolerance must be >= 0, got {}", args.tolerance)).into());
    }
    let specs = ctx.config.server.treatment_specs()?;
    let treatments: Vec<_> = TreatmentKind::ALL.iter().map(|k| specs[k].clone()).collect();
    let seed = ctx.seed();
    let paths = select_sample_paths(&treatments, args.n, args.tolerance, seed)?;
    let report = SelectReport {
        tolerance: args.tolerance,
        first_seed: seed,
        candidates: args.n,
        paths,
    };
    ctx.output.emit(&report, render)?;
    Ok(Outcome::Pass)
}

pub fn render(r: &SelectReport) -> String {
    let mut headers = vec!["seed".to_string()];
    if let Some(p) = r.paths.first() {
        for s in &p.strengths {
            headers.push(format!("{} (expected {:.2}%)", s.kind.label(), s.theoretical));
        }
    }
    let rows: Vec<Vec<String>> = r
        .paths
        .iter()
        .map(|p| {
            std::iter::once(p.meta.seed.to_string())
                .chain(p.strengths.iter().map(|s| match s.realized {
                    Some(x) => format!("{x:.2}%"),
                    None => "undefined".into(),
                }))
                .collect()
        })
        .collect();
    let headers: Vec<&str> = headers.iter().map(String::as_str).collect();
    format!(
        "{} of {} candidate paths (seeds {}..{}) within {} points for every treatment\n\n{}",
        r.paths.len(),
        r.candidates,
        r.first_seed,
        r.first_seed.wrapping_add(r.candidates as u64),
        r.tolerance,
        if r.paths.is_empty() { String::new() } else { table(&headers, &rows) }
    )
}
