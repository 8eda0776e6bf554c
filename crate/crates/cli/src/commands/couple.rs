use batchlab::des::{couple, generate_sample_path_with, CouplingReport, PathLaws};
use batchlab::StrategyProfile;
use clap::Args;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::verify::CouplingProfile;
use crate::model::{LawArgs, Model, ModelArgs};
use crate::{Context, Outcome};

#[derive(Args, Debug)]
pub struct CoupleArgs {
    #[command(flatten)]
    pub model: ModelArgs,
    /// Compare a random profile instead of the model's policy.
    #[arg(long, value_enum)]
    pub profile: Option<CouplingProfile>,
    #[command(flatten)]
    pub law: LawArgs,
    #[arg(long)]
    pub horizon: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CoupleOutput {
    pub model: Model,
    /// The profile compared with its assign-one counterpart.
    pub profile: StrategyProfile,
    pub laws: PathLaws,
    pub horizon: f64,
    pub report: CouplingReport,
}

/// Exits 1 when dominance fails on the path.
pub fn run(ctx: &Context, args: &CoupleArgs) -> anyhow::Result<Outcome> {
    let model = Model::resolve(&args.model, &ctx.config)?;
    let seed = ctx.seed();
    let profile = match args.profile {
        Some(CouplingProfile::Random) => {
            let max_batch = vec![2; model.params.physicians];
            let order = model.profile.decision_order.clone();
            StrategyProfile::random(&model.params, &max_batch, order, &mut ChaCha8Rng::seed_from_u64(seed))
        }
        Some(CouplingProfile::Batch) | None => model.profile.clone(),
    };
    let horizon = ctx.horizon(args.horizon, batchlab::calibration::SHIFT_LENGTH);
    let laws = args.law.laws(&model.params);
    let path = generate_sample_path_with(&model.params, seed, horizon, laws)?;
    let report = couple(&path, &model.params, &profile)?;
    let holds = report.dominance_holds;
    let out = CoupleOutput {
        model,
        profile,
        laws,
        horizon,
        report,
    };
    ctx.output.emit(&out, render)?;
    Ok(if holds { Outcome::Pass } else { Outcome::Violation })
}

pub fn render(o: &CoupleOutput) -> String {
    let r = &o.report;
    let last = r.checkpoints.last();
    let mut out = format!(
        "{}\nseed {}, horizon {}, {} checkpoints\n",
        o.model.describe(),
        r.seed,
        o.horizon,
        r.checkpoints.len()
    );
    if let Some(c) = last {
        out.push_str(&format!(
            "at the end: N* {} vs N {}, C* {} vs C {}, admitted {} vs {}\n",
            c.n_star, c.n_alt, c.c_star, c.c_alt, c.admitted_star, c.admitted_alt
        ));
    }
    let v = &r.violations;
    out.push_str(&format!(
        "violations: N {}, C {}, admissions {}, N with equal admissions {}\n",
        v.occupancy, v.completions, v.admissions, v.occupancy_same_admissions
    ));
    match &r.first_violation {
        Some(f) => out.push_str(&format!("dominance fails; first at t={:.4}: {}\n", f.time, f.detail)),
        None => out.push_str("dominance holds\n"),
    }
    out
}
