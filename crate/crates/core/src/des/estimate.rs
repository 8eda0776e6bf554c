use std::collections::BTreeMap;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::path::{generate_sample_path_with, PathLaws};
use super::sim::{simulate_with, SimOptions, SimSummary};
use crate::error::{Error, Result};
use crate::model::{StrategyProfile, SystemParams, SystemState};

/// Point estimate with its standard error.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Estimate {
    pub mean: f64,
    pub se: f64,
}

impl Estimate {
    /// `mean +- z * se`.
    pub fn ci(&self, z: f64) -> (f64, f64) {
        (self.mean - z * self.se, self.mean + z * self.se)
    }

    pub fn within(&self, value: f64, k: f64) -> bool {
        (self.mean - value).abs() <= k * self.se
    }

    /// Mean and standard error of the sample mean.
    pub fn from_samples(xs: &[f64]) -> Self {
        let n = xs.len() as f64;
        let mean = xs.iter().sum::<f64>() / n;
        let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
        Self {
            mean,
            se: (var / n).sqrt(),
        }
    }

    /// Pooled ratio `sum y / sum x` with a delta-method standard error.
    pub fn ratio(ys: &[f64], xs: &[f64]) -> Self {
        let n = xs.len() as f64;
        let (sy, sx) = (ys.iter().sum::<f64>(), xs.iter().sum::<f64>());
        let r = sy / sx;
        let xbar = sx / n;
        let var = ys
            .iter()
            .zip(xs)
            .map(|(y, x)| (y - r * x).powi(2))
            .sum::<f64>()
            / (n - 1.0);
        Self {
            mean: r,
            se: (var / n).sqrt() / xbar,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EstimateOptions {
    pub n_runs: usize,
    pub horizon: f64,
    /// Discarded prefix of each run, removing the empty-start bias.
    pub warmup: f64,
    pub seed: u64,
    #[serde(default)]
    pub laws: PathLaws,
}

impl EstimateOptions {
    pub fn new(n_runs: usize, horizon: f64, seed: u64) -> Self {
        Self {
            n_runs,
            horizon,
            warmup: 0.0,
            seed,
            laws: PathLaws::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StateEstimate {
    pub state: SystemState,
    pub fraction: Estimate,
}

/// Monte Carlo counterpart of the exact metrics report.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MonteCarloReport {
    pub runs: usize,
    pub horizon: f64,
    pub warmup: f64,
    pub system_throughput: Estimate,
    pub individual_throughput: Vec<Estimate>,
    pub mean_occupancy: Estimate,
    pub mean_sojourn: Estimate,
    pub blocking_rate: Estimate,
    /// Fraction of observed time spent in each visited state.
    pub state_occupancy: Vec<StateEstimate>,
}

impl MonteCarloReport {
    /// Zero for states never visited.
    pub fn state_fraction(&self, state: &SystemState) -> Estimate {
        self.state_occupancy
            .iter()
            .find(|s| &s.state == state)
            .map_or(Estimate { mean: 0.0, se: 0.0 }, |s| s.fraction)
    }
}

/// Independent replications, one per seed `seed, seed + 1, ...`, run in
/// parallel and reduced in seed order. Each run observes
/// `[warmup, horizon]` and drains afterwards so every observed admission
/// contributes a sojourn time.
pub fn estimate_metrics(
    params: &SystemParams,
    profile: &StrategyProfile,
    options: &EstimateOptions,
) -> Result<MonteCarloReport> {
    if options.n_runs < 2 {
        return Err(Error::Invalid(format!(
            "need at least 2 runs, got {}",
            options.n_runs
        )));
    }
    if !(options.warmup >= 0.0 && options.warmup < options.horizon) {
        return Err(Error::Invalid(format!(
            "warm-up {} must lie in [0, horizon)",
            options.warmup
        )));
    }
    params.validate()?;
    profile.validate(params.physicians)?;

    let runs: Vec<SimSummary> = (0..options.n_runs as u64)
        .into_par_iter()
        .map(|i| {
            let seed = options.seed.wrapping_add(i);
            let path = generate_sample_path_with(params, seed, options.horizon, options.laws)?;
            let sim = SimOptions {
                record_events: false,
                warmup: options.warmup,
                drain: true,
                external: None,
            };
            simulate_with(&path, params, profile, sim).map(|(_, s)| s)
        })
        .collect::<Result<_>>()?;

    let len = options.horizon - options.warmup;
    let per_run = |f: &dyn Fn(&SimSummary) -> f64| runs.iter().map(f).collect::<Vec<f64>>();

    let throughput = per_run(&|s| s.window.completions.iter().sum::<u64>() as f64 / len);
    let individual = (0..params.physicians)
        .map(|i| Estimate::from_samples(&per_run(&|s| s.window.completions[i] as f64 / len)))
        .collect();
    let occupancy = per_run(&|s| s.window.occupancy_integral / len);
    let sojourn = Estimate::ratio(
        &per_run(&|s| s.window.sojourn_sum),
        &per_run(&|s| s.window.sojourn_count as f64),
    );
    let blocking = Estimate::ratio(
        &per_run(&|s| s.window.blocked as f64),
        &per_run(&|s| s.window.offered as f64),
    );

    let mut visited: BTreeMap<SystemState, Vec<f64>> = BTreeMap::new();
    for (k, run) in runs.iter().enumerate() {
        for st in &run.window.state_time {
            visited
                .entry(st.state.clone())
                .or_insert_with(|| vec![0.0; runs.len()])[k] = st.time / len;
        }
    }
    let mut state_occupancy: Vec<StateEstimate> = visited
        .into_iter()
        .map(|(state, xs)| StateEstimate {
            state,
            fraction: Estimate::from_samples(&xs),
        })
        .collect();
    state_occupancy.sort_by(|a, b| a.state.canonical_key().cmp(&b.state.canonical_key()));

    Ok(MonteCarloReport {
        runs: runs.len(),
        horizon: options.horizon,
        warmup: options.warmup,
        system_throughput: Estimate::from_samples(&throughput),
        individual_throughput: individual,
        mean_occupancy: Estimate::from_samples(&occupancy),
        mean_sojourn: sojourn,
        blocking_rate: blocking,
        state_occupancy,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ctmc::metrics;
    use crate::model::Strategy;

    #[test]
    fn estimates_of_a_constant() {
        let e = Estimate::from_samples(&[2.0, 2.0, 2.0]);
        assert_eq!((e.mean, e.se), (2.0, 0.0));
        let r = Estimate::ratio(&[2.0, 4.0], &[1.0, 2.0]);
        assert_eq!((r.mean, r.se), (2.0, 0.0));
        assert!(r.within(2.0, 0.0));
    }

    #[test]
    fn deterministic_given_seed() {
        let p = SystemParams::experimental();
        let profile = StrategyProfile::experimental(Strategy::Batch);
        let opts = EstimateOptions::new(8, 1000.0, 77);
        assert_eq!(
            estimate_metrics(&p, &profile, &opts).unwrap(),
            estimate_metrics(&p, &profile, &opts).unwrap()
        );
    }

    #[test]
    fn error_shrinks_like_root_n() {
        let p = SystemParams::experimental();
        let profile = StrategyProfile::experimental(Strategy::NoBatch);
        let exact = metrics(&p, &profile).unwrap();
        let mut small = EstimateOptions::new(50, 3000.0, 1);
        small.warmup = 500.0;
        let mut large = small.clone();
        large.n_runs = 800;
        let a = estimate_metrics(&p, &profile, &small).unwrap();
        let b = estimate_metrics(&p, &profile, &large).unwrap();
        let ratio = a.system_throughput.se / b.system_throughput.se;
        assert!((ratio - 4.0).abs() < 1.0, "{ratio}");
        for r in [&a, &b] {
            assert!(r.system_throughput.within(exact.system_throughput, 4.0));
            assert!(r.mean_sojourn.within(exact.mean_sojourn, 4.0));
        }
    }

    #[test]
    fn light_traffic_has_no_blocking() {
        let p = SystemParams::experimental_with_rates(1e-4, 1.0);
        let profile = StrategyProfile::experimental(Strategy::NoBatch);
        let r = estimate_metrics(&p, &profile, &EstimateOptions::new(20, 1e4, 3)).unwrap();
        let (lo, hi) = r.blocking_rate.ci(3.0);
        assert!(lo <= 0.0 && 0.0 <= hi);
    }

    #[test]
    fn rejects_single_run() {
        let p = SystemParams::experimental();
        let profile = StrategyProfile::experimental(Strategy::NoBatch);
        assert!(estimate_metrics(&p, &profile, &EstimateOptions::new(1, 10.0, 0)).is_err());
    }
}
