use batchlab::ctmc::{focal_policy_family, verify_proposition1, MetricsReport, OptimalityReport};
use batchlab::des::{couple, generate_sample_path_with, PathLaws, Violation, ViolationCounts};
use batchlab::{StrategyProfile, SystemParams};
use clap::{Args, ValueEnum};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::model::{LawArgs, Policy};
use crate::output::table;
use crate::{Context, Outcome, Usage};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum CouplingProfile {
    /// A fresh uniformly random stationary profile per seed.
    Random,
    /// The focal physician batches, the partner claims one.
    Batch,
}

#[derive(Args, Debug)]
pub struct VerifyArgs {
    /// Check a single arrival rate instead of the grid.
    #[arg(long, allow_hyphen_values = true)]
    pub lambda: Option<f64>,
    /// Check a single service rate instead of the grid.
    #[arg(long, allow_hyphen_values = true)]
    pub mu: Option<f64>,
    /// Grid size: lambda rises over [1e-2, 1e2] while mu falls over the same range.
    #[arg(long, default_value_t = 20)]
    pub pairs: usize,
    /// Tolerance on |closed form - numeric|.
    #[arg(long, default_value_t = 1e-8)]
    pub tol: f64,
    /// Sample paths for the coupling check (0 skips it).
    #[arg(long, default_value_t = 0)]
    pub seeds: u64,
    #[arg(long, value_enum, default_value = "random")]
    pub profile: CouplingProfile,
    #[command(flatten)]
    pub law: LawArgs,
    #[arg(long)]
    pub horizon: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PairCheck {
    pub lambda: f64,
    pub mu: f64,
    pub optimality: OptimalityReport,
    /// Focal-physician profiles compared with assigning one.
    pub family: usize,
    pub dominance_violations: Vec<String>,
    pub passed: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SeedViolation {
    pub seed: u64,
    pub violation: Violation,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CouplingCheck {
    pub first_seed: u64,
    pub seeds: u64,
    pub profile: CouplingProfile,
    pub laws: PathLaws,
    pub horizon: f64,
    pub failing_seeds: Vec<u64>,
    /// Checkpoint violations summed over seeds.
    pub violations: ViolationCounts,
    pub first_violation: Option<SeedViolation>,
    pub passed: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VerifyReport {
    pub pairs: Vec<PairCheck>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub coupling: Option<CouplingCheck>,
    pub passed: bool,
}

fn logspace(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    if n == 1 {
        return vec![10f64.powf(lo)];
    }
    (0..n)
        .map(|k| 10f64.powf(lo + (hi - lo) * k as f64 / (n - 1) as f64))
        .collect()
}

fn grid(args: &VerifyArgs) -> anyhow::Result<Vec<(f64, f64)>> {
    for (name, v) in [("--lambda", args.lambda), ("--mu", args.mu)] {
        if let Some(x) = v {
            if !(x.is_finite() && x > 0.0) {
                return Err(Usage(format!("{name} must be a positive rate, got {x}")).into());
            }
        }
    }
    if args.lambda.is_some() || args.mu.is_some() {
        let p = SystemParams::experimental();
        return Ok(vec![(
            args.lambda.unwrap_or(p.arrival_rate),
            args.mu.unwrap_or(p.service_rate),
        )]);
    }
    if args.pairs == 0 {
        return Err(Usage("--pairs must be at least 1".into()).into());
    }
    let lambdas = logspace(-2.0, 2.0, args.pairs);
    let mus = logspace(-2.0, 2.0, args.pairs).into_iter().rev();
    Ok(lambdas.into_iter().zip(mus).collect())
}

/// Throughput no higher and sojourn no lower than under assigning one.
fn dominance(reference: &MetricsReport, family: &[MetricsReport]) -> Vec<String> {
    let slack = |x: f64| 1e-10 * x.abs().max(1e-300);
    family
        .iter()
        .enumerate()
        .flat_map(|(k, m)| {
            let mut v = Vec::new();
            if m.system_throughput > reference.system_throughput + slack(reference.system_throughput) {
                v.push(format!(
                    "profile {k}: throughput {} exceeds {}",
                    m.system_throughput, reference.system_throughput
                ));
            }
            if m.mean_sojourn < reference.mean_sojourn - slack(reference.mean_sojourn) {
                v.push(format!(
                    "profile {k}: sojourn {} below {}",
                    m.mean_sojourn, reference.mean_sojourn
                ));
            }
            v
        })
        .collect()
}

fn check_pair(lambda: f64, mu: f64, tol: f64) -> anyhow::Result<PairCheck> {
    let optimality = verify_proposition1(lambda, mu, tol)?;
    let (reference, family) = focal_policy_family(&SystemParams::experimental_with_rates(lambda, mu))?;
    let dominance_violations = dominance(&reference, &family);
    Ok(PairCheck {
        lambda,
        mu,
        passed: optimality.passed && dominance_violations.is_empty(),
        optimality,
        family: family.len(),
        dominance_violations,
    })
}

fn check_coupling(ctx: &Context, args: &VerifyArgs, params: &SystemParams) -> anyhow::Result<CouplingCheck> {
    let first = ctx.seed();
    let horizon = ctx.horizon(args.horizon, batchlab::calibration::SHIFT_LENGTH);
    let laws = args.law.laws(params);
    let max_batch = vec![2; params.physicians];
    let order: Vec<usize> = Policy::Batch.profile(params.physicians).decision_order;
    let mut check = CouplingCheck {
        first_seed: first,
        seeds: args.seeds,
        profile: args.profile,
        laws,
        horizon,
        failing_seeds: Vec::new(),
        violations: ViolationCounts::default(),
        first_violation: None,
        passed: true,
    };
    for seed in (0..args.seeds).map(|k| first.wrapping_add(k)) {
        let profile = match args.profile {
            CouplingProfile::Random => {
                let mut rng = ChaCha8Rng::seed_from_u64(seed);
                StrategyProfile::random(params, &max_batch, order.clone(), &mut rng)
            }
            CouplingProfile::Batch => Policy::Batch.profile(params.physicians),
        };
        let path = generate_sample_path_with(params, seed, horizon, laws)?;
        let r = couple(&path, params, &profile)?;
        let v = &mut check.violations;
        v.occupancy += r.violations.occupancy;
        v.completions += r.violations.completions;
        v.admissions += r.violations.admissions;
        v.occupancy_same_admissions += r.violations.occupancy_same_admissions;
        if !r.dominance_holds {
            check.passed = false;
            check.failing_seeds.push(seed);
            if check.first_violation.is_none() {
                check.first_violation = r.first_violation.map(|violation| SeedViolation { seed, violation });
            }
        }
    }
    Ok(check)
}

pub fn run(ctx: &Context, args: &VerifyArgs) -> anyhow::Result<Outcome> {
    let pairs = grid(args)?
        .into_iter()
        .map(|(l, m)| check_pair(l, m, args.tol))
        .collect::<anyhow::Result<Vec<_>>>()?;
    let coupling = if args.seeds > 0 {
        let params = match pairs.as_slice() {
            [one] => SystemParams::experimental_with_rates(one.lambda, one.mu),
            _ => SystemParams::experimental(),
        };
        Some(check_coupling(ctx, args, &params)?)
    } else {
        None
    };
    let passed = pairs.iter().all(|p| p.passed) && coupling.as_ref().is_none_or(|c| c.passed);
    let report = VerifyReport {
        pairs,
        coupling,
        passed,
    };
    ctx.output.emit(&report, render)?;
    Ok(if passed { Outcome::Pass } else { Outcome::Violation })
}

fn verdict(ok: bool) -> &'static str {
    if ok {
        "pass"
    } else {
        "FAIL"
    }
}

pub fn render(r: &VerifyReport) -> String {
    let rows: Vec<Vec<String>> = r
        .pairs
        .iter()
        .map(|p| {
            let n = &p.optimality.deltas.numeric;
            let worst = p
                .optimality
                .deltas
                .abs_diff
                .as_array()
                .iter()
                .map(|(_, d)| *d)
                .fold(0.0, f64::max);
            vec![
                format!("{:.4e}", p.lambda),
                format!("{:.4e}", p.mu),
                format!("{:.4e}", n.delta1_b),
                format!("{:.4e}", n.delta1_nb),
                format!("{:.4e}", n.delta2_nb),
                format!("{worst:.1e}"),
                format!("{}", p.family),
                verdict(p.passed).into(),
            ]
        })
        .collect();
    let mut out = table(
        &["lambda", "mu", "delta1_B", "delta1_NB", "delta2_NB", "max diff", "profiles", "result"],
        &rows,
    );
    for p in r.pairs.iter().filter(|p| !p.passed) {
        for v in p.optimality.violations.iter().chain(&p.dominance_violations) {
            out.push_str(&format!("  lambda={:.4e} mu={:.4e}: {v}\n", p.lambda, p.mu));
        }
    }
    if let Some(c) = &r.coupling {
        out.push_str(&format!(
            "\ncoupling over seeds {}..{} ({:?} profiles, horizon {}): {}/{} paths violate dominance\n",
            c.first_seed,
            c.first_seed.wrapping_add(c.seeds),
            c.profile,
            c.horizon,
            c.failing_seeds.len(),
            c.seeds
        ));
        let v = &c.violations;
        out.push_str(&format!(
            "checkpoint violations: N {}, C {}, admissions {}, N with equal admissions {}\n",
            v.occupancy, v.completions, v.admissions, v.occupancy_same_admissions
        ));
        if let Some(f) = &c.first_violation {
            out.push_str(&format!(
                "first: seed {} at t={:.4}: {}\n",
                f.seed, f.violation.time, f.violation.detail
            ));
        }
    }
    out.push_str(&format!("\n{}\n", if r.passed { "all checks pass" } else { "violations found" }));
    out
}
