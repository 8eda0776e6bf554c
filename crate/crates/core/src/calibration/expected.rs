use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::money::Money;
use super::treatment::{TerminalTable, TreatmentKind, TreatmentSpec};
use crate::ctmc::{
    build_generator, expected_cumulative_reward, solve_poisson, transient_distribution,
    DEFAULT_TRANSIENT_TOL,
};
use crate::des::{generate_sample_path, simulate_with, SimOptions, SimSummary};
use crate::error::{Error, Result};
use crate::model::{Strategy, StrategyProfile, SystemParams};

/// Expected shift metric when the focal physician follows `strategy`,
/// crediting the end state with that strategy's own relative values.
///
/// The credit makes the expected total equal to `g T + h(start)`, so the
/// two strategies are compared on their long-run rates rather than on
/// where the shift happens to stop.
pub fn expected_metric(spec: &TreatmentSpec, strategy: Strategy) -> Result<f64> {
    let profile = StrategyProfile::experimental(strategy);
    let own = super::terminal_adjustment_table(&spec.params, &spec.kind.reward(), &profile)?;
    expected_metric_with_table(spec, strategy, &own)
}

/// Expected cumulative metric plus `sum_s P(X_T = s) credit(s)` for an
/// arbitrary credit table.
pub fn expected_metric_with_table(
    spec: &TreatmentSpec,
    strategy: Strategy,
    table: &TerminalTable,
) -> Result<f64> {
    let params = &spec.params;
    let gen = build_generator(params, &StrategyProfile::experimental(strategy))?;
    let start = params.empty_state();
    let reward = spec.kind.reward();
    let cumulative = expected_cumulative_reward(&gen, &reward, &start, spec.horizon)?;
    let end = transient_distribution(&gen, &start, spec.horizon, DEFAULT_TRANSIENT_TOL)?;
    let mut credit = 0.0;
    for (s, p) in end.iter() {
        if p == 0.0 {
            continue;
        }
        credit += p * table
            .credit(s)
            .ok_or_else(|| Error::UnknownState(s.clone()))?;
    }
    Ok(cumulative + credit)
}

/// Long-run shortcut for [`expected_metric`]: `g T + h(start)`.
pub fn expected_metric_stationary(spec: &TreatmentSpec, strategy: Strategy) -> Result<f64> {
    let params = &spec.params;
    let gen = build_generator(params, &StrategyProfile::experimental(strategy))?;
    let sol = solve_poisson(&gen, &spec.kind.reward(), &params.empty_state())?;
    Ok(sol.gain * spec.horizon)
}

fn linear_bonus_for(spec: &TreatmentSpec, strategy: Strategy) -> Result<f64> {
    Ok(spec.linear_bonus(expected_metric(spec, strategy)?))
}

/// `per_unit * (E[metric] - threshold)` (reversed for the sojourn
/// treatment), linear in the expectation.
pub fn expected_bonus(spec: &TreatmentSpec, strategy: Strategy) -> Result<Money> {
    Ok(Money::from_dollars(linear_bonus_for(spec, strategy)?))
}

/// Percentage gain in expected bonus from the optimal over the other
/// strategy.
pub fn incentive_strength(spec: &TreatmentSpec) -> Result<f64> {
    let opt = spec.kind.optimal();
    strength_from(
        linear_bonus_for(spec, opt)?,
        linear_bonus_for(spec, opt.other())?,
    )
}

fn strength_from(bonus_opt: f64, bonus_sub: f64) -> Result<f64> {
    if bonus_sub <= 0.0 {
        return Err(Error::Invalid(format!(
            "incentive strength undefined: suboptimal bonus is {bonus_sub}"
        )));
    }
    Ok((bonus_opt - bonus_sub) / bonus_sub * 100.0)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CalibrationReport {
    pub kind: TreatmentKind,
    pub threshold: f64,
    pub per_unit: Money,
    pub base_fee: Money,
    pub expected_metric_opt: f64,
    pub expected_metric_subopt: f64,
    pub bonus_opt: Money,
    pub bonus_subopt: Money,
    /// Percent.
    pub incentive_strength: f64,
    pub expected_earnings_opt: Money,
}

pub fn calibration_report(spec: &TreatmentSpec) -> Result<CalibrationReport> {
    let opt = spec.kind.optimal();
    let m_opt = expected_metric(spec, opt)?;
    let m_sub = expected_metric(spec, opt.other())?;
    let (b_opt, b_sub) = (spec.linear_bonus(m_opt), spec.linear_bonus(m_sub));
    let bonus_opt = Money::from_dollars(b_opt);
    Ok(CalibrationReport {
        kind: spec.kind,
        threshold: spec.threshold,
        per_unit: spec.per_unit,
        base_fee: spec.base_fee,
        expected_metric_opt: m_opt,
        expected_metric_subopt: m_sub,
        bonus_opt,
        bonus_subopt: Money::from_dollars(b_sub),
        incentive_strength: strength_from(b_opt, b_sub)?,
        expected_earnings_opt: spec.base_fee + bonus_opt,
    })
}

/// Targets and search grid for [`calibrate`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CalibrationTargets {
    /// Percent.
    pub strength: f64,
    pub earnings: Money,
    pub strength_tol: f64,
    pub earnings_tol: Money,
    pub base_fee: Money,
    pub horizon: f64,
    /// Spacing of candidate thresholds.
    pub threshold_step: f64,
    /// Resolution of the per-unit rate.
    pub rate_step: Money,
}

impl CalibrationTargets {
    /// Tolerances of half a point and five cents; thresholds on whole
    /// patients, or on hundreds of time units for the sojourn treatment;
    /// rates in hundredths of a cent.
    pub fn new(kind: TreatmentKind, strength: f64, earnings: Money) -> Self {
        Self {
            strength,
            earnings,
            strength_tol: 0.5,
            earnings_tol: Money::from_cents(5),
            base_fee: Money::from_cents(200),
            horizon: super::SHIFT_LENGTH,
            threshold_step: if kind.is_time_based() { 100.0 } else { 1.0 },
            rate_step: Money::from_micros(100),
        }
    }

    /// Published targets: strengths of 14.8 / 15.2 / 15.4 percent and
    /// optimal expected earnings of $4.37 / $4.65 / $4.22 for the
    /// individual, group and sojourn-time treatments.
    pub fn published(kind: TreatmentKind) -> Self {
        let (strength, cents) = match kind {
            TreatmentKind::It => (14.8, 437),
            TreatmentKind::Gt | TreatmentKind::GtNudge => (15.2, 465),
            TreatmentKind::GtSt => (15.4, 422),
        };
        Self::new(kind, strength, Money::from_cents(cents))
    }
}

/// Chooses the grid threshold whose incentive strength is closest to the
/// target (strength does not depend on the rate), then the per-unit rate,
/// rounded to a mill, that puts optimal expected earnings on target.
/// Thresholds stay on the side of expected performance that keeps both
/// strategies' bonuses positive.
pub fn calibrate(
    kind: TreatmentKind,
    targets: &CalibrationTargets,
    params: &SystemParams,
) -> Result<(TreatmentSpec, CalibrationReport)> {
    if !(targets.threshold_step > 0.0) {
        return Err(Error::Invalid("threshold step must be > 0".into()));
    }
    let probe = TreatmentSpec::with_terms(
        kind,
        params.clone(),
        targets.base_fee,
        0.0,
        Money::from_mills(1),
        targets.horizon,
    )?;
    let opt = kind.optimal();
    let m_opt = expected_metric(&probe, opt)?;
    let m_sub = expected_metric(&probe, opt.other())?;

    let step = targets.threshold_step;
    let candidates: Vec<f64> = if kind.is_time_based() {
        let first = (m_opt.max(m_sub) / step).floor() as i64 + 1;
        (first..first + 10_000).map(|k| k as f64 * step).collect()
    } else {
        let last = (m_opt.min(m_sub) / step).ceil() as i64 - 1;
        (0..=last.max(-1)).map(|k| k as f64 * step).collect()
    };
    let strength_at = |threshold: f64| {
        let (a, b) = if kind.is_time_based() {
            (threshold - m_opt, threshold - m_sub)
        } else {
            (m_opt - threshold, m_sub - threshold)
        };
        (a - b) / b * 100.0
    };
    let threshold = candidates
        .iter()
        .copied()
        .min_by(|x, y| {
            (strength_at(*x) - targets.strength)
                .abs()
                .total_cmp(&(strength_at(*y) - targets.strength).abs())
        })
        .ok_or_else(|| Error::Infeasible("no admissible threshold".into()))?;

    let units_opt = if kind.is_time_based() {
        threshold - m_opt
    } else {
        m_opt - threshold
    };
    let per_unit = Money::from_dollars((targets.earnings - targets.base_fee).dollars() / units_opt)
        .round_to(targets.rate_step);
    if per_unit <= Money::ZERO {
        return Err(Error::Infeasible(format!(
            "earnings target {} does not exceed the base fee",
            targets.earnings
        )));
    }
    let spec = TreatmentSpec::with_terms(
        kind,
        params.clone(),
        targets.base_fee,
        threshold,
        per_unit,
        targets.horizon,
    )?;
    let report = calibration_report(&spec)?;
    let strength_gap = (report.incentive_strength - targets.strength).abs();
    let earnings_gap = (report.expected_earnings_opt - targets.earnings).micros().abs();
    if strength_gap > targets.strength_tol || earnings_gap > targets.earnings_tol.micros() {
        return Err(Error::Infeasible(format!(
            "best threshold {threshold} gives strength {:.2}% and earnings {} \
             (targets {:.2}% +- {}, {} +- {})",
            report.incentive_strength,
            report.expected_earnings_opt,
            targets.strength,
            targets.strength_tol,
            targets.earnings,
            targets.earnings_tol
        )));
    }
    Ok((spec, report))
}

/// Monte Carlo check of the linear expected-bonus approximation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ThresholdCheck {
    pub strategy: Strategy,
    pub shifts: usize,
    /// Fraction of shifts whose realized metric lands on the unpaid side
    /// of the threshold.
    pub prob_unpaid: f64,
    pub mean_clipped_bonus: f64,
    pub linear_bonus: f64,
    /// `prob_unpaid <= 1%`.
    pub valid: bool,
}

/// Realized shift metric: the raw count or person-time plus the credit
/// of the end state.
pub fn realized_metric(spec: &TreatmentSpec, summary: &SimSummary) -> Result<(f64, f64)> {
    let raw = match spec.kind {
        TreatmentKind::It => summary.completions[0] as f64,
        TreatmentKind::Gt | TreatmentKind::GtNudge => summary.total_completions() as f64,
        TreatmentKind::GtSt => summary.occupancy_integral,
    };
    let credit = spec
        .terminal_table
        .credit(&summary.end_state)
        .ok_or_else(|| Error::UnknownState(summary.end_state.clone()))?;
    Ok((raw, credit))
}

pub fn check_threshold(
    spec: &TreatmentSpec,
    strategy: Strategy,
    shifts: usize,
    seed: u64,
) -> Result<ThresholdCheck> {
    if shifts == 0 {
        return Err(Error::Invalid("need at least one shift".into()));
    }
    let profile = StrategyProfile::experimental(strategy);
    let metrics: Vec<f64> = (0..shifts as u64)
        .into_par_iter()
        .map(|i| {
            let path = generate_sample_path(&spec.params, seed.wrapping_add(i), spec.horizon)?;
            let opts = SimOptions {
                record_events: false,
                ..SimOptions::default()
            };
            let (_, s) = simulate_with(&path, &spec.params, &profile, opts)?;
            realized_metric(spec, &s).map(|(raw, credit)| raw + credit)
        })
        .collect::<Result<_>>()?;
    let unpaid = metrics.iter().filter(|m| spec.linear_bonus(**m) < 0.0).count();
    let prob_unpaid = unpaid as f64 / shifts as f64;
    let mean_clipped_bonus =
        metrics.iter().map(|m| spec.linear_bonus(*m).max(0.0)).sum::<f64>() / shifts as f64;
    Ok(ThresholdCheck {
        strategy,
        shifts,
        prob_unpaid,
        mean_clipped_bonus,
        linear_bonus: linear_bonus_for(spec, strategy)?,
        valid: prob_unpaid <= 0.01,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_horizon_metric_is_zero() {
        let mut spec = TreatmentSpec::paper(TreatmentKind::GtSt).unwrap();
        spec.horizon = 0.0;
        for s in [Strategy::Batch, Strategy::NoBatch] {
            assert_eq!(expected_metric(&spec, s).unwrap(), 0.0);
        }
    }

    #[test]
    fn own_credit_gives_gain_times_horizon() {
        for kind in [TreatmentKind::It, TreatmentKind::Gt, TreatmentKind::GtSt] {
            let spec = TreatmentSpec::paper(kind).unwrap();
            for s in [Strategy::Batch, Strategy::NoBatch] {
                let a = expected_metric(&spec, s).unwrap();
                let b = expected_metric_stationary(&spec, s).unwrap();
                assert!((a - b).abs() < 1e-8 * b.abs().max(1.0), "{kind} {s:?}: {a} vs {b}");
            }
        }
    }

    #[test]
    fn bonus_is_rate_times_excess() {
        for kind in TreatmentKind::ALL {
            let spec = TreatmentSpec::paper(kind).unwrap();
            for s in [Strategy::Batch, Strategy::NoBatch] {
                let m = expected_metric(&spec, s).unwrap();
                let excess = if kind.is_time_based() {
                    spec.threshold - m
                } else {
                    m - spec.threshold
                };
                let direct = spec.per_unit.dollars() * excess;
                let b = expected_bonus(&spec, s).unwrap();
                assert!((b.dollars() - direct).abs() <= 0.0005 + 1e-12);
            }
        }
    }

    #[test]
    fn strengths_near_fifteen_percent() {
        for (kind, want) in [
            (TreatmentKind::It, 14.8),
            (TreatmentKind::Gt, 15.2),
            (TreatmentKind::GtNudge, 15.2),
            (TreatmentKind::GtSt, 15.4),
        ] {
            let s = incentive_strength(&TreatmentSpec::paper(kind).unwrap()).unwrap();
            assert!((s - want).abs() <= 0.3, "{kind}: {s}");
        }
    }

    #[test]
    fn calibration_recovers_thresholds() {
        let p = SystemParams::experimental();
        for (kind, threshold) in [
            (TreatmentKind::It, 6.0),
            (TreatmentKind::Gt, 36.0),
            (TreatmentKind::GtSt, 1200.0),
        ] {
            let t = CalibrationTargets::new(kind, 15.0, Money::from_cents(465));
            let (spec, report) = calibrate(kind, &t, &p).unwrap();
            assert_eq!(spec.threshold, threshold, "{kind}");
            let gap = report.expected_earnings_opt - Money::from_cents(465);
            assert!(gap.micros().abs() <= Money::from_cents(5).micros());
        }
    }

    #[test]
    fn calibration_reports_infeasible_targets() {
        let p = SystemParams::experimental();
        let t = CalibrationTargets::new(TreatmentKind::It, 80.0, Money::from_cents(465));
        assert!(matches!(
            calibrate(TreatmentKind::It, &t, &p),
            Err(Error::Infeasible(_))
        ));
    }

    #[test]
    fn threshold_check_flags_unpaid_shifts() {
        let it = TreatmentSpec::paper(TreatmentKind::It).unwrap();
        let c = check_threshold(&it, Strategy::Batch, 400, 1).unwrap();
        assert!(c.valid, "{c:?}");
        // The joint threshold of 36 is about one standard deviation below
        // the mean, so a sizeable share of shifts pays nothing.
        let gt = TreatmentSpec::paper(TreatmentKind::Gt).unwrap();
        let c = check_threshold(&gt, Strategy::NoBatch, 400, 1).unwrap();
        assert!(!c.valid && c.prob_unpaid > 0.05, "{c:?}");
        assert!(c.mean_clipped_bonus > c.linear_bonus);
    }
}
