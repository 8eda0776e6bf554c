//! System parameters, states, decision rules and the instantaneous
//! assignment cascade shared by the exact analyzer and the simulator.
//!
//! Physicians are indexed from 0. In the two-physician experimental
//! configuration physician 0 is the focal player and physician 1 the
//! programmed partner, who decides first at simultaneous epochs.

use std::collections::BTreeSet;
use std::fmt;
use std::str::FromStr;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

const DIST_TOLERANCE: f64 = 1e-12;

/// The parameter tuple of the pooled-assignment model.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SystemParams {
    /// Treatment rooms (system capacity).
    pub rooms: u32,
    pub physicians: usize,
    /// Group arrival rate per time unit.
    pub arrival_rate: f64,
    /// `group_dist[k - 1]` is the probability that an arriving group has `k` patients.
    pub group_dist: Vec<f64>,
    /// Service rate of a single physician per time unit.
    pub service_rate: f64,
}

impl SystemParams {
    /// Four rooms, two physicians, groups of three arriving every 30 time
    /// units on average, mean treatment time 15.
    pub fn experimental() -> Self {
        Self::experimental_with_rates(1.0 / 30.0, 1.0 / 15.0)
    }

    pub fn experimental_with_rates(arrival_rate: f64, service_rate: f64) -> Self {
        Self {
            rooms: 4,
            physicians: 2,
            arrival_rate,
            group_dist: vec![0.0, 0.0, 1.0],
            service_rate,
        }
    }

    /// Reports the first violated invariant.
    pub fn validate(&self) -> Result<()> {
        let fail = |msg: String| Err(Error::InvalidParams(msg));
        if self.rooms < 1 {
            return fail(format!("rooms (M) must be >= 1, got {}", self.rooms));
        }
        if self.physicians < 2 {
            return fail(format!(
                "physicians (N) must be >= 2, got {}",
                self.physicians
            ));
        }
        if !(self.arrival_rate.is_finite() && self.arrival_rate > 0.0) {
            return fail(format!(
                "arrival_rate (lambda) must be > 0, got {}",
                self.arrival_rate
            ));
        }
        if !(self.service_rate.is_finite() && self.service_rate > 0.0) {
            return fail(format!(
                "service_rate (mu) must be > 0, got {}",
                self.service_rate
            ));
        }
        if self.group_dist.is_empty() {
            return fail("group_dist is empty".into());
        }
        if let Some((k, p)) = self
            .group_dist
            .iter()
            .enumerate()
            .find(|(_, p)| !(p.is_finite() && **p >= 0.0))
        {
            return fail(format!("group_dist[{}] = {} is negative", k + 1, p));
        }
        let total: f64 = self.group_dist.iter().sum();
        if (total - 1.0).abs() > DIST_TOLERANCE {
            return fail(format!("group_dist sums to {total}"));
        }
        Ok(())
    }

    /// Largest group size with positive probability.
    pub fn max_group(&self) -> u32 {
        self.group_dist
            .iter()
            .rposition(|p| *p > 0.0)
            .map_or(0, |k| k as u32 + 1)
    }

    /// E[K].
    pub fn mean_group_size(&self) -> f64 {
        self.group_dist
            .iter()
            .enumerate()
            .map(|(k, p)| (k as f64 + 1.0) * p)
            .sum()
    }

    /// Returns a copy with both rates multiplied by `factor`.
    pub fn scaled(&self, factor: f64) -> Self {
        Self {
            arrival_rate: self.arrival_rate * factor,
            service_rate: self.service_rate * factor,
            ..self.clone()
        }
    }

    pub fn empty_state(&self) -> SystemState {
        SystemState::empty(self.physicians)
    }
}

/// `(U, A_1, ..., A_N)`: unassigned patients and per-physician caseloads.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct SystemState {
    #[serde(rename = "u")]
    pub unassigned: u32,
    #[serde(rename = "a")]
    pub caseloads: Vec<u32>,
}

impl SystemState {
    pub fn new(unassigned: u32, caseloads: Vec<u32>) -> Self {
        Self {
            unassigned,
            caseloads,
        }
    }

    pub fn empty(physicians: usize) -> Self {
        Self::new(0, vec![0; physicians])
    }

    /// Patients in rooms, assigned or not.
    pub fn occupancy(&self) -> u32 {
        self.unassigned + self.caseloads.iter().sum::<u32>()
    }

    /// Physicians with a nonzero caseload.
    pub fn busy(&self) -> u32 {
        self.caseloads.iter().filter(|a| **a > 0).count() as u32
    }

    /// No physician sits idle while unassigned patients wait.
    pub fn is_stable(&self) -> bool {
        self.unassigned == 0 || self.caseloads.iter().all(|a| *a > 0)
    }

    /// Ordering used for generator rows: unassigned count, then number of
    /// busy physicians, then caseloads lexicographically.
    pub fn canonical_key(&self) -> (u32, u32, &[u32]) {
        (self.unassigned, self.busy(), &self.caseloads)
    }
}

impl fmt::Display for SystemState {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({}", self.unassigned)?;
        for a in &self.caseloads {
            write!(f, ",{a}")?;
        }
        write!(f, ")")
    }
}

impl FromStr for SystemState {
    type Err = Error;

    /// Parses `(U,A1,...,AN)`; parentheses are optional.
    fn from_str(s: &str) -> Result<Self> {
        let inner = s.trim().trim_start_matches('(').trim_end_matches(')');
        let parts = inner
            .split(',')
            .map(|p| p.trim().parse::<u32>())
            .collect::<std::result::Result<Vec<_>, _>>()
            .map_err(|e| Error::Invalid(format!("bad state {s:?}: {e}")))?;
        if parts.len() < 2 {
            return Err(Error::Invalid(format!("bad state {s:?}: need U and caseloads")));
        }
        Ok(Self::new(parts[0], parts[1..].to_vec()))
    }
}

/// Number of patients of an arriving group that find a free room.
/// The rest are blocked and never return.
pub fn admit_count(state: &SystemState, group_size: u32, rooms: u32) -> u32 {
    group_size.min(rooms.saturating_sub(state.occupancy()))
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TableEntry {
    pub state: SystemState,
    pub claim: u32,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum RuleKind {
    /// Always claim exactly one patient.
    AssignOne,
    /// Claim as many as allowed: `min(U, max_batch)`.
    Greedy,
    /// Explicit claim per pre-decision state.
    Table { entries: Vec<TableEntry> },
}

/// A stationary decision rule `d(U, A)` for one physician.
///
/// `max_batch` bounds the physician's option set, not just the rule's
/// choice: the state space explored by the analyzer contains every state
/// reachable by some claim in `1..=min(U, max_batch)`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DecisionRule {
    pub max_batch: u32,
    #[serde(flatten)]
    pub kind: RuleKind,
}

impl DecisionRule {
    pub fn assign_one(max_batch: u32) -> Self {
        Self {
            max_batch,
            kind: RuleKind::AssignOne,
        }
    }

    pub fn greedy(max_batch: u32) -> Self {
        Self {
            max_batch,
            kind: RuleKind::Greedy,
        }
    }

    /// Claim count for `physician` facing `state` (which must have them idle
    /// with `U >= 1`). Errors if the rule breaks `1 <= d <= min(U, max_batch)`.
    pub fn claim(&self, physician: usize, state: &SystemState) -> Result<u32> {
        let max = state.unassigned.min(self.max_batch);
        let claim = match &self.kind {
            RuleKind::AssignOne => 1,
            RuleKind::Greedy => max,
            RuleKind::Table { entries } => entries
                .iter()
                .find(|e| &e.state == state)
                .map(|e| e.claim)
                .ok_or_else(|| {
                    Error::InvalidProfile(format!(
                        "no table entry for physician {physician} in state {state}"
                    ))
                })?,
        };
        if claim < 1 || claim > max {
            return Err(Error::InvalidClaim {
                physician,
                claim,
                max,
                state: state.clone(),
            });
        }
        Ok(claim)
    }
}

/// Binary choice offered to the focal physician in the experiment.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Strategy {
    /// Claim two whenever possible ("B").
    Batch,
    /// Always claim one ("NB").
    NoBatch,
}

impl Strategy {
    pub fn other(self) -> Self {
        match self {
            Strategy::Batch => Strategy::NoBatch,
            Strategy::NoBatch => Strategy::Batch,
        }
    }

    pub fn label(self) -> &'static str {
        match self {
            Strategy::Batch => "B",
            Strategy::NoBatch => "NB",
        }
    }
}

impl FromStr for Strategy {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "batch" | "b" | "assign-two" | "assign_two" | "both-batch" => Ok(Strategy::Batch),
            "no-batch" | "no_batch" | "nb" | "assign-one" | "assign_one" => Ok(Strategy::NoBatch),
            other => Err(Error::Invalid(format!("unknown strategy {other:?}"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct StrategyProfile {
    pub rules: Vec<DecisionRule>,
    /// Order in which idle physicians decide at one instant.
    pub decision_order: Vec<usize>,
}

impl StrategyProfile {
    /// Experimental profile: focal physician 0 (max batch 2) follows
    /// `strategy`, partner 1 always claims one and decides first.
    pub fn experimental(strategy: Strategy) -> Self {
        let focal = match strategy {
            Strategy::Batch => DecisionRule::greedy(2),
            Strategy::NoBatch => DecisionRule::assign_one(2),
        };
        Self {
            rules: vec![focal, DecisionRule::assign_one(1)],
            decision_order: vec![1, 0],
        }
    }

    /// Every physician claims one; ascending decision order.
    pub fn all_assign_one(physicians: usize, max_batch: u32) -> Self {
        Self {
            rules: vec![DecisionRule::assign_one(max_batch); physicians],
            decision_order: (0..physicians).collect(),
        }
    }

    /// Same option sets and decision order, but every rule claims one.
    pub fn assign_one_counterpart(&self) -> Self {
        Self {
            rules: self
                .rules
                .iter()
                .map(|r| DecisionRule::assign_one(r.max_batch))
                .collect(),
            decision_order: self.decision_order.clone(),
        }
    }

    pub fn physicians(&self) -> usize {
        self.rules.len()
    }

    pub fn validate(&self, physicians: usize) -> Result<()> {
        if self.rules.len() != physicians {
            return Err(Error::InvalidProfile(format!(
                "{} rules for {} physicians",
                self.rules.len(),
                physicians
            )));
        }
        let mut seen = vec![false; physicians];
        for &i in &self.decision_order {
            if i >= physicians || std::mem::replace(&mut seen[i], true) {
                return Err(Error::InvalidProfile(format!(
                    "decision_order {:?} is not a permutation of 0..{}",
                    self.decision_order, physicians
                )));
            }
        }
        if self.decision_order.len() != physicians {
            return Err(Error::InvalidProfile(format!(
                "decision_order {:?} is not a permutation of 0..{}",
                self.decision_order, physicians
            )));
        }
        if let Some(i) = self.rules.iter().position(|r| r.max_batch < 1) {
            return Err(Error::InvalidProfile(format!(
                "physician {i} has max_batch 0"
            )));
        }
        Ok(())
    }

    /// Replaces every rule by an explicit table over all states in which
    /// the physician could be asked to decide.
    pub fn expand_tables(&self, params: &SystemParams) -> Result<Self> {
        let mut rules = Vec::with_capacity(self.rules.len());
        for (i, rule) in self.rules.iter().enumerate() {
            let entries = decision_states(params, i)
                .into_iter()
                .map(|state| {
                    rule.claim(i, &state)
                        .map(|claim| TableEntry { state, claim })
                })
                .collect::<Result<Vec<_>>>()?;
            rules.push(DecisionRule {
                max_batch: rule.max_batch,
                kind: RuleKind::Table { entries },
            });
        }
        Ok(Self {
            rules,
            decision_order: self.decision_order.clone(),
        })
    }

    /// A uniformly random admissible stationary profile: every physician
    /// gets an independent random claim in each of its decision states.
    pub fn random<R: Rng + ?Sized>(
        params: &SystemParams,
        max_batch: &[u32],
        decision_order: Vec<usize>,
        rng: &mut R,
    ) -> Self {
        let rules = max_batch
            .iter()
            .enumerate()
            .map(|(i, &cap)| {
                let entries = decision_states(params, i)
                    .into_iter()
                    .map(|state| {
                        let hi = state.unassigned.min(cap);
                        let claim = rng.random_range(1..=hi);
                        TableEntry { state, claim }
                    })
                    .collect();
                DecisionRule {
                    max_batch: cap,
                    kind: RuleKind::Table { entries },
                }
            })
            .collect();
        Self {
            rules,
            decision_order,
        }
    }
}

/// All states with physician `i` idle, `U >= 1` and at most `M` patients.
pub fn decision_states(params: &SystemParams, i: usize) -> Vec<SystemState> {
    let n = params.physicians;
    let m = params.rooms;
    let mut out = Vec::new();
    let mut caseloads = vec![0u32; n];
    fn rec(
        idx: usize,
        skip: usize,
        remaining: u32,
        caseloads: &mut Vec<u32>,
        out: &mut Vec<SystemState>,
    ) {
        if idx == caseloads.len() {
            for u in 1..=remaining {
                out.push(SystemState::new(u, caseloads.clone()));
            }
            return;
        }
        if idx == skip {
            return rec(idx + 1, skip, remaining, caseloads, out);
        }
        for a in 0..=remaining {
            caseloads[idx] = a;
            rec(idx + 1, skip, remaining - a, caseloads, out);
        }
        caseloads[idx] = 0;
    }
    rec(0, i, m, &mut caseloads, &mut out);
    out.sort();
    out
}

/// One physician's claim during a cascade.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Claim {
    pub physician: usize,
    pub count: u32,
}

/// First physician in `order` who is idle while patients are unassigned.
pub fn next_decider(state: &SystemState, order: &[usize]) -> Option<usize> {
    if state.unassigned == 0 {
        return None;
    }
    order.iter().copied().find(|&i| state.caseloads[i] == 0)
}

/// Moves `count` unassigned patients to physician `i`.
pub fn apply_claim(state: &mut SystemState, physician: usize, count: u32) {
    debug_assert!(count <= state.unassigned);
    state.unassigned -= count;
    state.caseloads[physician] += count;
}

/// Runs the assignment cascade and returns the stable state reached.
pub fn apply_assignment_cascade(
    state: &SystemState,
    profile: &StrategyProfile,
) -> Result<SystemState> {
    cascade_with_claims(state, profile).map(|(s, _)| s)
}

/// Like [`apply_assignment_cascade`], also returning who claimed what.
pub fn cascade_with_claims(
    state: &SystemState,
    profile: &StrategyProfile,
) -> Result<(SystemState, Vec<Claim>)> {
    let mut s = state.clone();
    let mut claims = Vec::new();
    while let Some(i) = next_decider(&s, &profile.decision_order) {
        let count = profile.rules[i].claim(i, &s)?;
        apply_claim(&mut s, i, count);
        claims.push(Claim {
            physician: i,
            count,
        });
    }
    Ok((s, claims))
}

/// Every stable state reachable from `state` by some admissible sequence
/// of claims (each physician bounded by its rule's `max_batch`).
pub fn cascade_outcomes(state: &SystemState, profile: &StrategyProfile) -> BTreeSet<SystemState> {
    let mut out = BTreeSet::new();
    let mut stack = vec![state.clone()];
    while let Some(s) = stack.pop() {
        match next_decider(&s, &profile.decision_order) {
            None => {
                out.insert(s);
            }
            Some(i) => {
                let hi = s.unassigned.min(profile.rules[i].max_batch);
                for c in 1..=hi {
                    let mut next = s.clone();
                    apply_claim(&mut next, i, c);
                    stack.push(next);
                }
            }
        }
    }
    out
}

/// Per-state reward rate used by Poisson equations and cumulative rewards.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum RewardSpec {
    /// Completions by one physician: `mu * 1[A_focal >= 1]`.
    PersonalThroughput { focal: usize },
    /// Completions by everyone: `mu * #busy`.
    GroupThroughput,
    /// Patients present: `U + sum(A)`; integrates to person-time.
    Occupancy,
}

impl RewardSpec {
    pub fn rate(&self, state: &SystemState, params: &SystemParams) -> f64 {
        match *self {
            RewardSpec::PersonalThroughput { focal } => {
                if state.caseloads[focal] > 0 {
                    params.service_rate
                } else {
                    0.0
                }
            }
            RewardSpec::GroupThroughput => params.service_rate * state.busy() as f64,
            RewardSpec::Occupancy => state.occupancy() as f64,
        }
    }

    pub fn validate(&self, physicians: usize) -> Result<()> {
        match *self {
            RewardSpec::PersonalThroughput { focal } if focal >= physicians => Err(
                Error::InvalidParams(format!("focal index {focal} out of range 0..{physicians}")),
            ),
            _ => Ok(()),
        }
    }
}

impl FromStr for RewardSpec {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "personal" | "personal_throughput" => Ok(RewardSpec::PersonalThroughput { focal: 0 }),
            "group" | "group_throughput" => Ok(RewardSpec::GroupThroughput),
            "occupancy" | "sojourn" => Ok(RewardSpec::Occupancy),
            other => Err(Error::Invalid(format!("unknown reward {other:?}"))),
        }
    }
}
