use super::generator::Generator;
use super::solve::{solve_poisson, StateDistribution};
use crate::error::{Error, Result};
use crate::model::{RewardSpec, SystemState};

pub const DEFAULT_TRANSIENT_TOL: f64 = 1e-12;

/// Uniformization rate relative to the largest exit rate.
const UNIFORMIZATION_SLACK: f64 = 1.05;

/// Largest Poisson mean handled in one uniformization pass; longer horizons
/// are split and composed.
const MAX_STEP_MEAN: f64 = 400.0;

/// Distribution at `horizon` starting from a point mass on `start`.
pub fn transient_distribution(
    gen: &Generator,
    start: &SystemState,
    horizon: f64,
    tol: f64,
) -> Result<StateDistribution> {
    let i = gen.require_index(start)?;
    let init = StateDistribution::point_mass(gen.states.clone(), i);
    transient_from(gen, &init, horizon, tol)
}

/// Propagates `initial` forward by `horizon` via uniformization.
pub fn transient_from(
    gen: &Generator,
    initial: &StateDistribution,
    horizon: f64,
    tol: f64,
) -> Result<StateDistribution> {
    if !(horizon.is_finite() && horizon >= 0.0) {
        return Err(Error::Invalid(format!("horizon must be >= 0, got {horizon}")));
    }
    if !(tol > 0.0 && tol < 1.0) {
        return Err(Error::Invalid(format!("tolerance must lie in (0,1), got {tol}")));
    }
    if initial.probabilities.len() != gen.len() {
        return Err(Error::Invalid("distribution does not match generator".into()));
    }
    let n = gen.len();
    let max_exit = (0..n).map(|i| gen.exit_rate(i)).fold(0.0, f64::max);
    if horizon == 0.0 || max_exit == 0.0 {
        return Ok(initial.clone());
    }
    let q = max_exit * UNIFORMIZATION_SLACK;

    // P = I + Q / q
    let p: Vec<Vec<f64>> = gen
        .rates
        .iter()
        .enumerate()
        .map(|(i, row)| {
            row.iter()
                .enumerate()
                .map(|(j, r)| if i == j { 1.0 + r / q } else { r / q })
                .collect()
        })
        .collect();

    let total_mean = q * horizon;
    let chunks = (total_mean / MAX_STEP_MEAN).ceil().max(1.0) as usize;
    let chunk_mean = total_mean / chunks as f64;
    let chunk_tol = tol / chunks as f64;

    let mut v = initial.probabilities.clone();
    for _ in 0..chunks {
        v = uniformized_step(&p, &v, chunk_mean, chunk_tol);
    }
    Ok(StateDistribution {
        states: gen.states.clone(),
        probabilities: v,
    })
}

/// `sum_k Poisson(k; mean) * v P^k`, truncated once the right tail is below `tol`.
fn uniformized_step(p: &[Vec<f64>], v: &[f64], mean: f64, tol: f64) -> Vec<f64> {
    let n = v.len();
    let mut weight = (-mean).exp();
    let mut mass = weight;
    let mut term = v.to_vec();
    let mut acc: Vec<f64> = term.iter().map(|x| x * weight).collect();
    let mut k = 0usize;
    let mut next = vec![0.0; n];
    while (1.0 - mass) > tol || (k as f64) < mean {
        k += 1;
        next.iter_mut().for_each(|x| *x = 0.0);
        for (i, ti) in term.iter().enumerate() {
            if *ti == 0.0 {
                continue;
            }
            for (j, pij) in p[i].iter().enumerate() {
                next[j] += ti * pij;
            }
        }
        std::mem::swap(&mut term, &mut next);
        weight *= mean / k as f64;
        mass += weight;
        for (a, t) in acc.iter_mut().zip(&term) {
            *a += weight * t;
        }
        if k > 10 * (mean as usize + 100) {
            break;
        }
    }
    acc.iter().map(|a| a / mass).collect()
}

/// Expected reward accumulated over `[0, horizon]` from `start`:
/// `g T + h(start) - E[h(X_T)]`.
pub fn expected_cumulative_reward(
    gen: &Generator,
    reward: &RewardSpec,
    start: &SystemState,
    horizon: f64,
) -> Result<f64> {
    if horizon == 0.0 {
        gen.require_index(start)?;
        return Ok(0.0);
    }
    let sol = solve_poisson(gen, reward, &gen.states[0])?;
    let end = transient_distribution(gen, start, horizon, DEFAULT_TRANSIENT_TOL)?;
    let h_start = sol.value(start).ok_or_else(|| Error::UnknownState(start.clone()))?;
    Ok(sol.gain * horizon + h_start - end.expectation(&sol.relative_values))
}
