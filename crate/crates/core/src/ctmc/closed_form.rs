//! Relative-value comparisons behind the focal physician's optimal policy
//! in the experimental configuration, in closed form and numerically.

use serde::{Deserialize, Serialize};

use super::generator::build_generator;
use super::metrics::{metrics, MetricsReport};
use super::solve::solve_poisson;
use crate::error::{Error, Result};
use crate::model::{
    decision_states, DecisionRule, RewardSpec, RuleKind, Strategy, StrategyProfile, SystemParams,
    SystemState, TableEntry,
};

/// The two decision comparisons under each pure policy:
/// `d1 = h(0,2,1) - h(1,1,1)` and `d2 = h(1,2,1) - h(2,1,1)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Deltas {
    pub delta1_b: f64,
    pub delta2_b: f64,
    pub delta1_nb: f64,
    pub delta2_nb: f64,
}

impl Deltas {
    fn zip(self, other: Self, f: impl Fn(f64, f64) -> f64) -> Self {
        Self {
            delta1_b: f(self.delta1_b, other.delta1_b),
            delta2_b: f(self.delta2_b, other.delta2_b),
            delta1_nb: f(self.delta1_nb, other.delta1_nb),
            delta2_nb: f(self.delta2_nb, other.delta2_nb),
        }
    }

    pub fn as_array(&self) -> [(&'static str, f64); 4] {
        [
            ("delta1_B", self.delta1_b),
            ("delta2_B", self.delta2_b),
            ("delta1_NB", self.delta1_nb),
            ("delta2_NB", self.delta2_nb),
        ]
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DeltaReport {
    pub arrival_rate: f64,
    pub service_rate: f64,
    pub closed_form: Deltas,
    pub numeric: Deltas,
    pub abs_diff: Deltas,
}

/// Rational expressions for the four differences, evaluated directly.
pub fn closed_form_deltas(lambda: f64, mu: f64) -> Deltas {
    let (l, m) = (lambda, mu);
    let common = l.powi(4)
        + 7.0 * l.powi(3) * m
        + 18.0 * l.powi(2) * m.powi(2)
        + 18.0 * l * m.powi(3)
        + 8.0 * m.powi(4);
    let den_b = (l + m).powi(2)
        * (l.powi(5)
            + 9.0 * l.powi(4) * m
            + 32.0 * l.powi(3) * m.powi(2)
            + 53.0 * l.powi(2) * m.powi(3)
            + 42.0 * l * m.powi(4)
            + 16.0 * m.powi(5));
    let den_nb = (l + 2.0 * m).powi(2)
        * (l.powi(5)
            + 8.0 * l.powi(4) * m
            + 25.0 * l.powi(3) * m.powi(2)
            + 34.0 * l.powi(2) * m.powi(3)
            + 24.0 * l * m.powi(4)
            + 8.0 * m.powi(5));
    let m3 = m.powi(3);
    Deltas {
        delta1_b: m3 * common / den_b,
        delta2_b: 0.0,
        delta1_nb: 2.0 * m3 * common / den_nb,
        delta2_nb: m3 * common / den_nb,
    }
}

fn state(u: u32, a1: u32, a2: u32) -> SystemState {
    SystemState::new(u, vec![a1, a2])
}

/// The same differences from the Poisson equations under personal reward.
pub fn numeric_deltas(lambda: f64, mu: f64) -> Result<Deltas> {
    let params = SystemParams::experimental_with_rates(lambda, mu);
    let reward = RewardSpec::PersonalThroughput { focal: 0 };
    let mut out = [0.0; 4];
    for (k, strategy) in [Strategy::Batch, Strategy::NoBatch].into_iter().enumerate() {
        let gen = build_generator(&params, &StrategyProfile::experimental(strategy))?;
        let sol = solve_poisson(&gen, &reward, &params.empty_state())?;
        let diff = |a: SystemState, b: SystemState| {
            sol.difference(&a, &b)
                .ok_or_else(|| Error::UnknownState(a.clone()))
        };
        out[2 * k] = diff(state(0, 2, 1), state(1, 1, 1))?;
        out[2 * k + 1] = diff(state(1, 2, 1), state(2, 1, 1))?;
    }
    Ok(Deltas {
        delta1_b: out[0],
        delta2_b: out[1],
        delta1_nb: out[2],
        delta2_nb: out[3],
    })
}

pub fn delta_report(lambda: f64, mu: f64) -> Result<DeltaReport> {
    let closed_form = closed_form_deltas(lambda, mu);
    let numeric = numeric_deltas(lambda, mu)?;
    Ok(DeltaReport {
        arrival_rate: lambda,
        service_rate: mu,
        closed_form,
        numeric,
        abs_diff: closed_form.zip(numeric, |a, b| (a - b).abs()),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OptimalityReport {
    pub passed: bool,
    pub deltas: DeltaReport,
    pub gain_batch: f64,
    pub gain_no_batch: f64,
    pub violations: Vec<String>,
}

/// Checks the closed forms against the numeric solution and the sign
/// conditions that make batching the focal physician's best response.
pub fn verify_proposition1(lambda: f64, mu: f64, tol: f64) -> Result<OptimalityReport> {
    if !(lambda > 0.0 && mu > 0.0 && lambda.is_finite() && mu.is_finite()) {
        return Err(Error::InvalidParams(format!(
            "rates must be positive, got lambda={lambda}, mu={mu}"
        )));
    }
    let deltas = delta_report(lambda, mu)?;
    let mut violations = Vec::new();
    for ((name, diff), (_, num)) in deltas
        .abs_diff
        .as_array()
        .into_iter()
        .zip(deltas.numeric.as_array())
    {
        if !(diff <= tol) {
            violations.push(format!("{name}: |closed - numeric| = {diff:e} > {tol:e}"));
        }
        let sign_ok = if name == "delta2_B" { num.abs() <= tol } else { num > 0.0 };
        if !sign_ok {
            violations.push(format!("{name}: numeric value {num:e} has the wrong sign"));
        }
    }
    if deltas.closed_form.delta2_b != 0.0 {
        violations.push("delta2_B closed form is not zero".into());
    }

    let params = SystemParams::experimental_with_rates(lambda, mu);
    let reward = RewardSpec::PersonalThroughput { focal: 0 };
    let gain = |s| -> Result<f64> {
        let gen = build_generator(&params, &StrategyProfile::experimental(s))?;
        Ok(solve_poisson(&gen, &reward, &params.empty_state())?.gain)
    };
    let gain_batch = gain(Strategy::Batch)?;
    let gain_no_batch = gain(Strategy::NoBatch)?;
    if !(gain_batch > gain_no_batch) {
        violations.push(format!(
            "gain under batching {gain_batch} does not exceed gain without {gain_no_batch}"
        ));
    }
    Ok(OptimalityReport {
        passed: violations.is_empty(),
        deltas,
        gain_batch,
        gain_no_batch,
        violations,
    })
}

/// Every stationary deterministic rule for `physician` over the states
/// where they could face two or more unassigned patients, holding the
/// other physicians' rules fixed. Errors past `limit` profiles.
pub fn enumerate_profiles(
    params: &SystemParams,
    base: &StrategyProfile,
    physician: usize,
    limit: usize,
) -> Result<Vec<StrategyProfile>> {
    let cap = base.rules[physician].max_batch;
    let states = decision_states(params, physician);
    let choices: Vec<u32> = states.iter().map(|s| s.unassigned.min(cap)).collect();
    let total = choices
        .iter()
        .try_fold(1usize, |acc, c| acc.checked_mul(*c as usize))
        .filter(|t| *t <= limit)
        .ok_or_else(|| Error::Invalid(format!("more than {limit} profiles")))?;

    let mut out = Vec::with_capacity(total);
    let mut digits = vec![1u32; states.len()];
    loop {
        let entries = states
            .iter()
            .zip(&digits)
            .map(|(s, c)| TableEntry {
                state: s.clone(),
                claim: *c,
            })
            .collect();
        let mut profile = base.clone();
        profile.rules[physician] = DecisionRule {
            max_batch: cap,
            kind: RuleKind::Table { entries },
        };
        out.push(profile);

        let mut k = 0;
        loop {
            if k == digits.len() {
                return Ok(out);
            }
            if digits[k] < choices[k] {
                digits[k] += 1;
                break;
            }
            digits[k] = 1;
            k += 1;
        }
    }
}

/// System metrics of all focal-physician profiles next to the
/// always-assign-one profile.
pub fn focal_policy_family(params: &SystemParams) -> Result<(MetricsReport, Vec<MetricsReport>)> {
    let base = StrategyProfile::experimental(Strategy::NoBatch).expand_tables(params)?;
    let reference = metrics(params, &StrategyProfile::experimental(Strategy::NoBatch))?;
    let family = enumerate_profiles(params, &base, 0, 1 << 16)?
        .iter()
        .map(|p| metrics(params, p))
        .collect::<Result<Vec<_>>>()?;
    Ok((reference, family))
}
