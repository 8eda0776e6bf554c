use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use super::generator::Generator;
use super::linalg::{solve_dense, solve_poisson_refined, DoubleDouble};
use crate::error::{Error, Result};
use crate::model::{RewardSpec, SystemState};

/// Probability mass over a generator's states.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StateDistribution {
    pub states: Vec<SystemState>,
    pub probabilities: Vec<f64>,
}

pub type SteadyState = StateDistribution;

impl StateDistribution {
    pub fn point_mass(states: Vec<SystemState>, at: usize) -> Self {
        let mut probabilities = vec![0.0; states.len()];
        probabilities[at] = 1.0;
        Self {
            states,
            probabilities,
        }
    }

    pub fn get(&self, state: &SystemState) -> Option<f64> {
        self.states
            .iter()
            .position(|s| s == state)
            .map(|i| self.probabilities[i])
    }

    /// `sum_s p(s) f(s)`.
    pub fn expectation(&self, values: &[f64]) -> f64 {
        self.probabilities
            .iter()
            .zip(values)
            .map(|(p, v)| p * v)
            .sum()
    }

    pub fn iter(&self) -> impl Iterator<Item = (&SystemState, f64)> {
        self.states.iter().zip(self.probabilities.iter().copied())
    }

    /// `max_j |(p Q)_j|`.
    pub fn balance_residual(&self, gen: &Generator) -> f64 {
        let n = gen.len();
        (0..n)
            .map(|j| {
                (0..n)
                    .map(|i| self.probabilities[i] * gen.rates[i][j])
                    .sum::<f64>()
                    .abs()
            })
            .fold(0.0, f64::max)
    }
}

/// Solves `pi Q = 0`, `sum pi = 1` with one balance equation replaced by
/// the normalization. Transient states receive zero mass.
pub fn steady_state(gen: &Generator) -> Result<SteadyState> {
    gen.ensure_unichain()?;
    let n = gen.len();
    let mut a = DMatrix::<f64>::zeros(n, n);
    for i in 0..n {
        for j in 0..n {
            a[(j, i)] = gen.rates[i][j];
        }
    }
    for i in 0..n {
        a[(n - 1, i)] = 1.0;
    }
    let mut b = DVector::<f64>::zeros(n);
    b[n - 1] = 1.0;
    let x = solve_dense(&a, &b)?;

    let mut probabilities: Vec<f64> = x.iter().map(|p| if p.abs() < 1e-15 { 0.0 } else { *p }).collect();
    if probabilities.iter().any(|p| *p < 0.0) {
        return Err(Error::Singular("negative stationary mass"));
    }
    let total: f64 = probabilities.iter().sum();
    for p in &mut probabilities {
        *p /= total;
    }
    Ok(StateDistribution {
        states: gen.states.clone(),
        probabilities,
    })
}

/// Gain and relative values of a Markov reward process.
///
/// `relative_values` is the rounded value per state; `low_order` carries
/// the residual bits so that [`PoissonSolution::difference`] stays accurate
/// when relative values nearly coincide.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PoissonSolution {
    pub gain: f64,
    pub reference: SystemState,
    pub states: Vec<SystemState>,
    pub relative_values: Vec<f64>,
    pub low_order: Vec<f64>,
}

impl PoissonSolution {
    pub fn value(&self, state: &SystemState) -> Option<f64> {
        self.index(state).map(|i| self.relative_values[i])
    }

    /// `h(a) - h(b)` evaluated before rounding.
    pub fn difference(&self, a: &SystemState, b: &SystemState) -> Option<f64> {
        let i = self.index(a)?;
        let j = self.index(b)?;
        let hi = DoubleDouble::new(self.relative_values[i], self.low_order[i]);
        let hj = DoubleDouble::new(self.relative_values[j], self.low_order[j]);
        Some(hi.sub(hj).to_f64())
    }

    fn index(&self, state: &SystemState) -> Option<usize> {
        self.states.iter().position(|s| s == state)
    }

    /// Largest violation of `g = rho(s) + (Q h)(s)` over all states.
    pub fn max_residual(&self, gen: &Generator, rho: &[f64]) -> f64 {
        let n = gen.len();
        (0..n)
            .map(|i| {
                let qh: f64 = (0..n).map(|j| gen.rates[i][j] * self.relative_values[j]).sum();
                (self.gain - rho[i] - qh).abs()
            })
            .fold(0.0, f64::max)
    }
}

/// Solves the Poisson equations for `reward` with `h(reference) = 0`.
pub fn solve_poisson(
    gen: &Generator,
    reward: &RewardSpec,
    reference: &SystemState,
) -> Result<PoissonSolution> {
    reward.validate(gen.params.physicians)?;
    solve_poisson_rates(gen, &gen.reward_vector(reward), reference)
}

/// Same as [`solve_poisson`] for an arbitrary per-state reward vector.
pub fn solve_poisson_rates(
    gen: &Generator,
    rho: &[f64],
    reference: &SystemState,
) -> Result<PoissonSolution> {
    if rho.len() != gen.len() {
        return Err(Error::Invalid(format!(
            "reward vector has {} entries for {} states",
            rho.len(),
            gen.len()
        )));
    }
    gen.ensure_unichain()?;
    let r = gen.require_index(reference)?;
    let raw = solve_poisson_refined(&gen.rates, rho, r)?;
    Ok(PoissonSolution {
        gain: raw.g.to_f64(),
        reference: reference.clone(),
        states: gen.states.clone(),
        relative_values: raw.h.iter().map(|v| v.hi).collect(),
        low_order: raw.h.iter().map(|v| v.lo).collect(),
    })
}
