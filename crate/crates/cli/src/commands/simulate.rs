use std::path::PathBuf;

use batchlab::ctmc::{metrics, MetricsReport};
use batchlab::des::{
    estimate_metrics, generate_sample_path_with, simulate_with, Estimate, EstimateOptions,
    MonteCarloReport, PathLaws, SimOptions, SimSummary,
};
use clap::Args;
use serde::{Deserialize, Serialize};

use crate::model::{LawArgs, Model, ModelArgs};
use crate::output::{table, write_atomic};
use crate::{Context, Outcome, Usage};

#[derive(Args, Debug)]
pub struct SimulateArgs {
    #[command(flatten)]
    pub model: ModelArgs,
    #[command(flatten)]
    pub law: LawArgs,
    /// Defaults to one 600-unit shift, or 10000 units per replication.
    #[arg(long)]
    pub horizon: Option<f64>,
    /// Independent replications; above 1 reports Monte Carlo estimates.
    #[arg(long, default_value_t = 1)]
    pub runs: usize,
    /// Discarded prefix of each replication.
    #[arg(long, default_value_t = 500.0)]
    pub warmup: f64,
    /// Write the event log of a single run here as JSON lines.
    #[arg(long)]
    pub events: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum SimulateReport {
    Shift {
        model: Model,
        seed: u64,
        laws: PathLaws,
        summary: SimSummary,
    },
    Replications {
        model: Model,
        options: EstimateOptions,
        estimate: MonteCarloReport,
        /// Exact stationary values when the paths are Markovian.
        #[serde(default, skip_serializing_if = "Option::is_none")]
        exact: Option<MetricsReport>,
    },
}

pub fn run(ctx: &Context, args: &SimulateArgs) -> anyhow::Result<Outcome> {
    let model = Model::resolve(&args.model, &ctx.config)?;
    let laws = args.law.laws(&model.params);
    let seed = ctx.seed();
    let report = if args.runs <= 1 {
        let horizon = ctx.horizon(args.horizon, batchlab::calibration::SHIFT_LENGTH);
        let path = generate_sample_path_with(&model.params, seed, horizon, laws)?;
        let options = SimOptions {
            record_events: args.events.is_some(),
            ..SimOptions::default()
        };
        let (traj, summary) = simulate_with(&path, &model.params, &model.profile, options)?;
        if let Some(events) = &args.events {
            let path = ctx.output.artifact_path(events);
            write_atomic(&path, traj.to_jsonl().as_bytes())?;
            tracing::info!(path = %path.display(), events = traj.events.len(), "wrote event log");
        }
        SimulateReport::Shift {
            model,
            seed,
            laws,
            summary,
        }
    } else {
        if args.events.is_some() {
            return Err(Usage("--events needs a single run".into()).into());
        }
        let mut options = EstimateOptions::new(args.runs, ctx.horizon(args.horizon, 10_000.0), seed);
        options.warmup = args.warmup;
        options.laws = laws;
        let estimate = estimate_metrics(&model.params, &model.profile, &options)?;
        let exact = if laws.is_markovian() {
            Some(metrics(&model.params, &model.profile)?)
        } else {
            None
        };
        SimulateReport::Replications {
            model,
            options,
            estimate,
            exact,
        }
    };
    ctx.output.emit(&report, render)?;
    Ok(Outcome::Pass)
}

fn est(e: &Estimate) -> String {
    format!("{:.5} ± {:.5}", e.mean, e.se)
}

pub fn render(r: &SimulateReport) -> String {
    match r {
        SimulateReport::Shift {
            model,
            seed,
            summary: s,
            ..
        } => {
            let per: Vec<String> = s.completions.iter().map(u64::to_string).collect();
            format!(
                "{}\nseed {seed}, horizon {}\n\noffered {}  admitted {}  blocked {}\ncompletions {} (per physician {})\noccupancy integral {:.4}\nend state {}\n",
                model.describe(),
                s.horizon,
                s.offered,
                s.admitted,
                s.blocked,
                s.total_completions(),
                per.join(" / "),
                s.occupancy_integral,
                s.end_state
            )
        }
        SimulateReport::Replications {
            model,
            options,
            estimate: e,
            exact,
        } => {
            let mut rows = vec![
                ("system throughput", &e.system_throughput, exact.as_ref().map(|x| x.system_throughput)),
                ("mean occupancy", &e.mean_occupancy, exact.as_ref().map(|x| x.mean_occupancy)),
                ("mean sojourn", &e.mean_sojourn, exact.as_ref().map(|x| x.mean_sojourn)),
                ("blocking rate", &e.blocking_rate, exact.as_ref().map(|x| x.blocking_rate)),
            ];
            let names: Vec<String> = (0..e.individual_throughput.len())
                .map(|i| format!("throughput of {i}"))
                .collect();
            for (i, name) in names.iter().enumerate() {
                rows.push((
                    name.as_str(),
                    &e.individual_throughput[i],
                    exact.as_ref().map(|x| x.individual_throughput[i]),
                ));
            }
            let cells: Vec<Vec<String>> = rows
                .into_iter()
                .map(|(name, m, x)| {
                    let (exact, z) = match x {
                        Some(v) if m.se > 0.0 => (format!("{v:.5}"), format!("{:+.2}", (m.mean - v) / m.se)),
                        Some(v) => (format!("{v:.5}"), "-".into()),
                        None => ("-".into(), "-".into()),
                    };
                    vec![name.to_string(), est(m), exact, z]
                })
                .collect();
            format!(
                "{}\n{} runs of {} units after a {}-unit warm-up, seeds from {}\n\n{}",
                model.describe(),
                e.runs,
                options.horizon,
                options.warmup,
                options.seed,
                table(&["metric", "estimate ± s.e.", "exact", "z"], &cells)
            )
        }
    }
}
