use std::collections::{BTreeMap, BTreeSet, HashMap, VecDeque};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{
    admit_count, apply_assignment_cascade, cascade_outcomes, StrategyProfile, SystemParams,
    SystemState,
};

pub const DEFAULT_MAX_STATES: usize = 1_000_000;

/// Rate matrix over stable states for one strategy profile.
///
/// Rows are ordered by [`SystemState::canonical_key`]; for the experimental
/// configuration this reproduces the usual nine-state layout starting at
/// `(0,0,0)` and ending at `(2,1,1)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Generator {
    pub params: SystemParams,
    pub states: Vec<SystemState>,
    /// Dense `Q`, row-major; diagonal is minus the row's off-diagonal sum.
    pub rates: Vec<Vec<f64>>,
}

impl Generator {
    pub fn len(&self) -> usize {
        self.states.len()
    }

    pub fn is_empty(&self) -> bool {
        self.states.is_empty()
    }

    pub fn index_of(&self, state: &SystemState) -> Option<usize> {
        self.states.iter().position(|s| s == state)
    }

    pub fn require_index(&self, state: &SystemState) -> Result<usize> {
        self.index_of(state)
            .ok_or_else(|| Error::UnknownState(state.clone()))
    }

    pub fn rate(&self, from: &SystemState, to: &SystemState) -> Option<f64> {
        Some(self.rates[self.index_of(from)?][self.index_of(to)?])
    }

    /// Total outflow rate of row `i`.
    pub fn exit_rate(&self, i: usize) -> f64 {
        self.rates[i]
            .iter()
            .enumerate()
            .filter(|(j, _)| *j != i)
            .map(|(_, q)| q)
            .sum()
    }

    /// Largest `|sum of row|` and most negative off-diagonal entry.
    pub fn structure_check(&self) -> (f64, f64) {
        let mut worst_row = 0.0f64;
        let mut min_off = 0.0f64;
        for (i, row) in self.rates.iter().enumerate() {
            worst_row = worst_row.max(row.iter().sum::<f64>().abs());
            for (j, q) in row.iter().enumerate() {
                if i != j {
                    min_off = min_off.min(*q);
                }
            }
        }
        (worst_row, min_off)
    }

    /// Number of closed communicating classes (1 for a unichain generator).
    pub fn closed_classes(&self) -> usize {
        let comp = strongly_connected(&self.rates);
        let ncomp = comp.iter().copied().max().map_or(0, |m| m + 1);
        let mut leaves = vec![true; ncomp];
        for (i, row) in self.rates.iter().enumerate() {
            for (j, q) in row.iter().enumerate() {
                if i != j && *q > 0.0 && comp[i] != comp[j] {
                    leaves[comp[i]] = false;
                }
            }
        }
        leaves.iter().filter(|l| **l).count()
    }

    pub fn is_irreducible(&self) -> bool {
        let comp = strongly_connected(&self.rates);
        comp.iter().all(|c| *c == 0)
    }

    pub fn ensure_unichain(&self) -> Result<()> {
        match self.closed_classes() {
            1 => Ok(()),
            k => Err(Error::NotUnichain(k)),
        }
    }

    /// Rate-weighted reward vector for `reward`, aligned with `states`.
    pub fn reward_vector(&self, reward: &crate::model::RewardSpec) -> Vec<f64> {
        self.states
            .iter()
            .map(|s| reward.rate(s, &self.params))
            .collect()
    }
}

/// Builds the collapsed generator with the default state bound.
pub fn build_generator(params: &SystemParams, profile: &StrategyProfile) -> Result<Generator> {
    build_generator_bounded(params, profile, DEFAULT_MAX_STATES)
}

/// Explores every stable state reachable from the empty system when each
/// physician may claim any admissible count, then fills the rates the
/// profile actually induces. States visited only under other claims end
/// up transient.
pub fn build_generator_bounded(
    params: &SystemParams,
    profile: &StrategyProfile,
    max_states: usize,
) -> Result<Generator> {
    params.validate()?;
    profile.validate(params.physicians)?;

    let start = params.empty_state();
    let mut seen: BTreeSet<SystemState> = BTreeSet::new();
    let mut queue = VecDeque::new();
    seen.insert(start.clone());
    queue.push_back(start);
    let mut transitions: BTreeMap<SystemState, Vec<(SystemState, f64)>> = BTreeMap::new();

    while let Some(s) = queue.pop_front() {
        let mut outs: Vec<(SystemState, f64)> = Vec::new();
        let mut envelope: BTreeSet<SystemState> = BTreeSet::new();

        for (k, p) in params.group_dist.iter().enumerate() {
            if *p <= 0.0 {
                continue;
            }
            let admitted = admit_count(&s, k as u32 + 1, params.rooms);
            if admitted == 0 {
                continue;
            }
            let mut pre = s.clone();
            pre.unassigned += admitted;
            envelope.extend(cascade_outcomes(&pre, profile));
            outs.push((apply_assignment_cascade(&pre, profile)?, params.arrival_rate * p));
        }
        for i in 0..params.physicians {
            if s.caseloads[i] == 0 {
                continue;
            }
            let mut pre = s.clone();
            pre.caseloads[i] -= 1;
            envelope.extend(cascade_outcomes(&pre, profile));
            outs.push((apply_assignment_cascade(&pre, profile)?, params.service_rate));
        }

        for t in envelope {
            if !seen.contains(&t) {
                if seen.len() >= max_states {
                    return Err(Error::StateSpaceTooLarge(max_states));
                }
                seen.insert(t.clone());
                queue.push_back(t);
            }
        }
        transitions.insert(s, outs);
    }

    let mut states: Vec<SystemState> = seen.into_iter().collect();
    states.sort_by(|a, b| a.canonical_key().cmp(&b.canonical_key()));
    let index: HashMap<&SystemState, usize> =
        states.iter().enumerate().map(|(i, s)| (s, i)).collect();

    let n = states.len();
    let mut rates = vec![vec![0.0; n]; n];
    for (s, outs) in &transitions {
        let i = index[s];
        for (t, q) in outs {
            if t == s {
                continue;
            }
            rates[i][index[t]] += q;
        }
    }
    for (i, row) in rates.iter_mut().enumerate() {
        let exit: f64 = row
            .iter()
            .enumerate()
            .filter(|(j, _)| *j != i)
            .map(|(_, q)| q)
            .sum();
        row[i] = -exit;
    }

    let gen = Generator {
        params: params.clone(),
        states,
        rates,
    };
    let (row_err, min_off) = gen.structure_check();
    debug_assert!(min_off >= 0.0);
    debug_assert!(row_err <= 1e-12 * (1.0 + params.arrival_rate + params.service_rate * params.physicians as f64));
    Ok(gen)
}

/// Component id per node (Kosaraju); ids are arbitrary but contiguous.
fn strongly_connected(rates: &[Vec<f64>]) -> Vec<usize> {
    let n = rates.len();
    let adj: Vec<Vec<usize>> = (0..n)
        .map(|i| (0..n).filter(|&j| j != i && rates[i][j] > 0.0).collect())
        .collect();
    let radj: Vec<Vec<usize>> = (0..n)
        .map(|j| (0..n).filter(|&i| i != j && rates[i][j] > 0.0).collect())
        .collect();

    let mut visited = vec![false; n];
    let mut order = Vec::with_capacity(n);
    for root in 0..n {
        if visited[root] {
            continue;
        }
        visited[root] = true;
        let mut stack = vec![(root, 0usize)];
        while let Some((v, next)) = stack.pop() {
            if next < adj[v].len() {
                stack.push((v, next + 1));
                let w = adj[v][next];
                if !visited[w] {
                    visited[w] = true;
                    stack.push((w, 0));
                }
            } else {
                order.push(v);
            }
        }
    }

    let mut comp = vec![usize::MAX; n];
    let mut c = 0;
    for &root in order.iter().rev() {
        if comp[root] != usize::MAX {
            continue;
        }
        comp[root] = c;
        let mut stack = vec![root];
        while let Some(v) = stack.pop() {
            for &w in &radj[v] {
                if comp[w] == usize::MAX {
                    comp[w] = c;
                    stack.push(w);
                }
            }
        }
        c += 1;
    }
    comp
}
