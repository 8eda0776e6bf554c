use std::io::Read;
use std::path::PathBuf;

use anyhow::Context as _;
use batchlab::des::{classify_assignments, Assignment, BatchLabel, Event, EventKind};
use clap::Args;
use serde::{Deserialize, Serialize};

use crate::output::table;
use crate::{Context, Outcome, Usage};

#[derive(Args, Debug)]
pub struct ClassifyArgs {
    /// JSON lines of assignments `{"t", "physician", "patient"}` or of
    /// simulator events (only assignments are used); `-` reads stdin.
    #[arg(long)]
    pub input: PathBuf,
    /// Largest gap between consecutive claims of one batch.
    #[arg(long, default_value_t = 5.0)]
    pub window: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PhysicianBatches {
    pub physician: usize,
    pub assignments: usize,
    pub batched: usize,
    pub batches: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassifyReport {
    pub window: f64,
    pub physicians: Vec<PhysicianBatches>,
    pub labels: Vec<BatchLabel>,
}

/// Accepts both line shapes; events other than assignments are skipped.
pub fn parse_assignments(text: &str) -> anyhow::Result<Vec<Assignment>> {
    let mut out = Vec::new();
    for (k, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let value: serde_json::Value =
            serde_json::from_str(line).map_err(|e| Usage(format!("line {}: {e}", k + 1)))?;
        if value.get("kind").is_some() {
            let e: Event =
                serde_json::from_value(value).map_err(|e| Usage(format!("line {}: {e}", k + 1)))?;
            if e.kind == EventKind::Assignment {
                match (e.physician, e.patient) {
                    (Some(physician), Some(patient)) => out.push(Assignment {
                        t: e.t,
                        physician,
                        patient,
                    }),
                    _ => return Err(Usage(format!("line {}: assignment without physician or patient", k + 1)).into()),
                }
            }
        } else {
            out.push(
                serde_json::from_value(value).map_err(|e| Usage(format!("line {}: {e}", k + 1)))?,
            );
        }
    }
    Ok(out)
}

pub fn run(ctx: &Context, args: &ClassifyArgs) -> anyhow::Result<Outcome> {
    if !(args.window >= 0.0 && args.window.is_finite()) {
        return Err(Usage(format!("--window must be finite and >= 0, got {}", args.window)).into());
    }
    let text = if args.input.as_os_str() == "-" {
        let mut s = String::new();
        std::io::stdin().read_to_string(&mut s)?;
        s
    } else {
        std::fs::read_to_string(&args.input)
            .with_context(|| format!("cannot read {}", args.input.display()))?
    };
    let assignments = parse_assignments(&text)?;
    let labels = classify_assignments(&assignments, args.window);
    let n = labels.iter().map(|l| l.physician + 1).max().unwrap_or(0);
    let physicians = (0..n)
        .map(|i| {
            let mine: Vec<&BatchLabel> = labels.iter().filter(|l| l.physician == i).collect();
            // A batch of size b contributes b labels.
            let batches = mine.iter().map(|l| 1.0 / f64::from(l.batch_size)).sum::<f64>().round() as usize;
            PhysicianBatches {
                physician: i,
                assignments: mine.len(),
                batched: mine.iter().filter(|l| l.batched).count(),
                batches,
            }
        })
        .collect();
    let report = ClassifyReport {
        window: args.window,
        physicians,
        labels,
    };
    ctx.output.emit(&report, render)?;
    Ok(Outcome::Pass)
}

pub fn render(r: &ClassifyReport) -> String {
    let rows: Vec<Vec<String>> = r
        .physicians
        .iter()
        .map(|p| {
            let share = if p.assignments > 0 {
                format!("{:.1}%", 100.0 * p.batched as f64 / p.assignments as f64)
            } else {
                "-".into()
            };
            vec![
                p.physician.to_string(),
                p.assignments.to_string(),
                p.batches.to_string(),
                p.batched.to_string(),
                share,
            ]
        })
        .collect();
    format!(
        "window {}\n\n{}",
        r.window,
        table(&["physician", "assignments", "claims", "batched", "batched share"], &rows)
    )
}
