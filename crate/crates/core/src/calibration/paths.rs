use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::expected::{incentive_strength, realized_metric};
use super::money::Money;
use super::treatment::{TreatmentKind, TreatmentSpec};
use crate::des::{generate_sample_path, simulate_with, PathMeta, SamplePath, SimOptions};
use crate::error::{Error, Result};
use crate::model::{Strategy, StrategyProfile};

/// Incentive strength of one treatment realized on one path.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RealizedStrength {
    pub kind: TreatmentKind,
    /// Metric including end-state credit under each strategy.
    pub metric_opt: f64,
    pub metric_subopt: f64,
    /// Percent; `None` when the suboptimal strategy earns no bonus.
    pub realized: Option<f64>,
    pub theoretical: f64,
}

impl RealizedStrength {
    /// Distance from the expected strength; infinite when undefined.
    pub fn deviation(&self) -> f64 {
        self.realized
            .map_or(f64::INFINITY, |r| (r - self.theoretical).abs())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SelectedPath {
    pub meta: PathMeta,
    pub strengths: Vec<RealizedStrength>,
}

fn shared_setting(treatments: &[TreatmentSpec]) -> Result<&TreatmentSpec> {
    let first = treatments
        .first()
        .ok_or_else(|| Error::Invalid("no treatments given".into()))?;
    if treatments
        .iter()
        .any(|t| t.params != first.params || t.horizon != first.horizon)
    {
        return Err(Error::Invalid(
            "treatments must share parameters and horizon to share paths".into(),
        ));
    }
    Ok(first)
}

/// Replays both strategies on `path` and scores every treatment with its
/// clipped realized bonus.
pub fn realized_strengths(
    path: &SamplePath,
    treatments: &[TreatmentSpec],
    theoretical: &[f64],
) -> Result<Vec<RealizedStrength>> {
    let base = shared_setting(treatments)?;
    let opts = SimOptions {
        record_events: false,
        ..SimOptions::default()
    };
    let run = |s: Strategy| {
        simulate_with(path, &base.params, &StrategyProfile::experimental(s), opts.clone())
            .map(|(_, sum)| sum)
    };
    let batch = run(Strategy::Batch)?;
    let no_batch = run(Strategy::NoBatch)?;

    treatments
        .iter()
        .zip(theoretical)
        .map(|(spec, theory)| {
            let (opt, sub) = match spec.kind.optimal() {
                Strategy::Batch => (&batch, &no_batch),
                Strategy::NoBatch => (&no_batch, &batch),
            };
            let total = |s| realized_metric(spec, s).map(|(raw, credit)| raw + credit);
            let (m_opt, m_sub) = (total(opt)?, total(sub)?);
            let (b_opt, b_sub) = (spec.realized_bonus(m_opt), spec.realized_bonus(m_sub));
            let realized = (b_sub > Money::ZERO)
                .then(|| (b_opt - b_sub).micros() as f64 / b_sub.micros() as f64 * 100.0);
            Ok(RealizedStrength {
                kind: spec.kind,
                metric_opt: m_opt,
                metric_subopt: m_sub,
                realized,
                theoretical: *theory,
            })
        })
        .collect()
}

/// Scans candidate paths with seeds `seed, seed + 1, ...` and keeps those
/// whose realized strength is within `tolerance_pp` points of the expected
/// strength for every treatment. The same paths serve all treatments.
pub fn select_sample_paths(
    treatments: &[TreatmentSpec],
    n_candidates: usize,
    tolerance_pp: f64,
    seed: u64,
) -> Result<Vec<SelectedPath>> {
    if n_candidates == 0 {
        return Err(Error::Invalid("need at least one candidate".into()));
    }
    let base = shared_setting(treatments)?;
    let theoretical = treatments
        .iter()
        .map(incentive_strength)
        .collect::<Result<Vec<_>>>()?;

    let scored: Vec<Option<SelectedPath>> = (0..n_candidates as u64)
        .into_par_iter()
        .map(|i| {
            let path = generate_sample_path(&base.params, seed.wrapping_add(i), base.horizon)?;
            let strengths = realized_strengths(&path, treatments, &theoretical)?;
            let ok = strengths
                .iter()
                .all(|s| s.deviation() <= tolerance_pp);
            Ok(ok.then(|| SelectedPath {
                meta: path.meta(),
                strengths,
            }))
        })
        .collect::<Result<_>>()?;
    Ok(scored.into_iter().flatten().collect())
}
