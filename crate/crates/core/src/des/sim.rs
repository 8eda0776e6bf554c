use std::collections::{BTreeMap, VecDeque};
use std::io::{self, Write};
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use super::path::SamplePath;
use crate::error::{Error, Result};
use crate::model::{admit_count, next_decider, StrategyProfile, SystemParams, SystemState};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EventKind {
    Arrival,
    Admission,
    Blocked,
    Assignment,
    ServiceStart,
    Completion,
    /// The externally controlled physician must choose a claim.
    AwaitingDecision,
    Decision,
}

/// One line of a trajectory log.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Event {
    pub t: f64,
    pub kind: EventKind,
    pub physician: Option<usize>,
    pub patient: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub claim: Option<u32>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Trajectory {
    pub events: Vec<Event>,
    pub end_state: SystemState,
}

impl Trajectory {
    /// One JSON object per line.
    pub fn write_jsonl<W: Write>(&self, mut w: W) -> io::Result<()> {
        for e in &self.events {
            serde_json::to_writer(&mut w, e)?;
            w.write_all(b"\n")?;
        }
        Ok(())
    }

    pub fn to_jsonl(&self) -> String {
        let mut buf = Vec::new();
        self.write_jsonl(&mut buf).expect("writing to memory");
        String::from_utf8(buf).expect("json is utf-8")
    }

    pub fn count(&self, kind: EventKind) -> usize {
        self.events.iter().filter(|e| e.kind == kind).count()
    }
}

/// Parses a JSON-lines event log.
pub fn parse_jsonl(text: &str) -> Result<Vec<Event>> {
    text.lines()
        .filter(|l| !l.trim().is_empty())
        .enumerate()
        .map(|(i, l)| {
            serde_json::from_str(l).map_err(|e| Error::Invalid(format!("line {}: {e}", i + 1)))
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StateTime {
    pub state: SystemState,
    pub time: f64,
}

/// Statistics restricted to the observation window `[start, end]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WindowStats {
    pub start: f64,
    pub end: f64,
    pub offered: u64,
    pub admitted: u64,
    pub blocked: u64,
    pub completions: Vec<u64>,
    /// Sum and count of sojourn times of patients admitted in the window
    /// that completed before the run stopped.
    pub sojourn_sum: f64,
    pub sojourn_count: u64,
    pub occupancy_integral: f64,
    pub state_time: Vec<StateTime>,
}

impl WindowStats {
    pub fn length(&self) -> f64 {
        self.end - self.start
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimSummary {
    pub horizon: f64,
    pub offered: u64,
    pub admitted: u64,
    pub blocked: u64,
    pub completions: Vec<u64>,
    pub initiations: u64,
    /// Integral of the number of patients in rooms over `[0, horizon]`.
    pub occupancy_integral: f64,
    pub end_state: SystemState,
    pub window: WindowStats,
}

impl SimSummary {
    pub fn total_completions(&self) -> u64 {
        self.completions.iter().sum()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimOptions {
    pub record_events: bool,
    /// Start of the observation window.
    pub warmup: f64,
    /// After the horizon, keep serving (without arrivals) until the rooms
    /// are empty so every window admission gets a sojourn time.
    pub drain: bool,
    /// Physician whose claims are supplied through [`Simulator::submit`]
    /// whenever two or more patients are waiting.
    pub external: Option<usize>,
}

impl Default for SimOptions {
    fn default() -> Self {
        Self {
            record_events: true,
            warmup: 0.0,
            drain: false,
            external: None,
        }
    }
}

/// Why a call to the simulator returned.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Stop {
    /// The clock reached the requested limit before the horizon.
    Running,
    AwaitingDecision { physician: usize, available: u32 },
    Finished,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct InService {
    pub patient: u64,
    pub started: f64,
    pub completes: f64,
}

enum Next {
    Completion(usize, f64),
    Arrival(f64),
}

impl Next {
    fn time(&self) -> f64 {
        match *self {
            Next::Completion(_, t) | Next::Arrival(t) => t,
        }
    }
}

/// Event-driven replay of one sample path under one strategy profile.
///
/// Service requirements are consumed in order of service initiation.
/// Simultaneous events run completions first (lowest physician index
/// first), then arrivals; each event is followed by the claim cascade.
/// A physician treats their claimed patients one at a time in order of
/// admission.
#[derive(Debug, Clone)]
pub struct Simulator {
    path: Arc<SamplePath>,
    params: SystemParams,
    profile: StrategyProfile,
    options: SimOptions,

    time: f64,
    /// Integrals are accumulated up to here, only ever at event epochs, so
    /// their values do not depend on how the caller slices the clock.
    integrated_to: f64,
    state: SystemState,
    unassigned: VecDeque<u64>,
    queues: Vec<VecDeque<u64>>,
    serving: Vec<Option<InService>>,
    admitted_at: Vec<f64>,
    next_arrival: usize,
    next_draw: usize,
    next_patient: u64,
    pending: Option<usize>,
    finished: bool,
    draining: bool,

    events: Vec<Event>,
    offered: u64,
    admitted: u64,
    blocked: u64,
    completions: Vec<u64>,
    occupancy_integral: f64,
    end_state: Option<SystemState>,
    window: WindowStats,
    state_time: BTreeMap<SystemState, f64>,
}

impl Simulator {
    pub fn new(
        path: Arc<SamplePath>,
        params: &SystemParams,
        profile: &StrategyProfile,
        options: SimOptions,
    ) -> Result<Self> {
        params.validate()?;
        profile.validate(params.physicians)?;
        if let Some(i) = options.external {
            if i >= params.physicians {
                return Err(Error::InvalidProfile(format!("no physician {i}")));
            }
        }
        if !(options.warmup >= 0.0 && options.warmup <= path.horizon) {
            return Err(Error::Invalid(format!(
                "warm-up {} outside [0, {}]",
                options.warmup, path.horizon
            )));
        }
        let n = params.physicians;
        let window = WindowStats {
            start: options.warmup,
            end: path.horizon,
            offered: 0,
            admitted: 0,
            blocked: 0,
            completions: vec![0; n],
            sojourn_sum: 0.0,
            sojourn_count: 0,
            occupancy_integral: 0.0,
            state_time: Vec::new(),
        };
        Ok(Self {
            admitted_at: vec![f64::NAN; path.offered_patients() as usize],
            path,
            params: params.clone(),
            profile: profile.clone(),
            options,
            time: 0.0,
            integrated_to: 0.0,
            state: params.empty_state(),
            unassigned: VecDeque::new(),
            queues: vec![VecDeque::new(); n],
            serving: vec![None; n],
            next_arrival: 0,
            next_draw: 0,
            next_patient: 0,
            pending: None,
            finished: false,
            draining: false,
            events: Vec::new(),
            offered: 0,
            admitted: 0,
            blocked: 0,
            completions: vec![0; n],
            occupancy_integral: 0.0,
            end_state: None,
            window,
            state_time: BTreeMap::new(),
        })
    }

    pub fn time(&self) -> f64 {
        self.time
    }

    pub fn state(&self) -> &SystemState {
        &self.state
    }

    pub fn path(&self) -> &SamplePath {
        &self.path
    }

    pub fn profile(&self) -> &StrategyProfile {
        &self.profile
    }

    pub fn events(&self) -> &[Event] {
        &self.events
    }

    pub fn is_finished(&self) -> bool {
        self.finished
    }

    pub fn pending(&self) -> Option<usize> {
        self.pending
    }

    pub fn completions(&self) -> &[u64] {
        &self.completions
    }

    /// Person-time so far, including the stretch since the last event.
    pub fn occupancy_integral(&self) -> f64 {
        let open = if self.draining { 0.0 } else { self.time - self.integrated_to };
        self.occupancy_integral + self.state.occupancy() as f64 * open.max(0.0)
    }

    /// Waiting patients with their admission times, earliest first.
    pub fn unassigned_patients(&self) -> Vec<(u64, f64)> {
        self.unassigned
            .iter()
            .map(|p| (*p, self.admitted_at[*p as usize]))
            .collect()
    }

    pub fn in_service(&self, physician: usize) -> Option<InService> {
        self.serving[physician]
    }

    /// Patients claimed by `physician` but not yet started.
    pub fn queued(&self, physician: usize) -> Vec<u64> {
        self.queues[physician].iter().copied().collect()
    }

    fn stop_reason(&self) -> Stop {
        if let Some(i) = self.pending {
            Stop::AwaitingDecision {
                physician: i,
                available: self.state.unassigned,
            }
        } else if self.finished {
            Stop::Finished
        } else {
            Stop::Running
        }
    }

    /// Processes every event up to `limit` (capped at the horizon), stopping
    /// early at a pending decision.
    pub fn run_until(&mut self, limit: f64) -> Result<Stop> {
        while self.pending.is_none() && !self.finished {
            match self.peek() {
                Some(next) if next.time() <= limit.min(self.path.horizon) => self.process(next)?,
                _ => {
                    if limit >= self.path.horizon {
                        self.finish()?;
                    } else if limit > self.time {
                        self.time = limit;
                    }
                    break;
                }
            }
        }
        Ok(self.stop_reason())
    }

    /// Processes a single event (or finishes the run if none remain before
    /// the horizon).
    pub fn step(&mut self) -> Result<Stop> {
        if self.pending.is_none() && !self.finished {
            match self.peek() {
                Some(next) if next.time() <= self.path.horizon => self.process(next)?,
                _ => self.finish()?,
            }
        }
        Ok(self.stop_reason())
    }

    pub fn run(&mut self) -> Result<Stop> {
        self.run_until(f64::INFINITY)
    }

    /// Resolves a pending decision with `claim` patients and continues the
    /// cascade at the same instant.
    pub fn submit(&mut self, claim: u32) -> Result<Stop> {
        let i = self
            .pending
            .ok_or_else(|| Error::Invalid("no decision is pending".into()))?;
        let max = self.profile.rules[i].max_batch.min(self.state.unassigned);
        if claim < 1 || claim > max {
            return Err(Error::InvalidClaim {
                physician: i,
                claim,
                max,
                state: self.state.clone(),
            });
        }
        self.pending = None;
        let mut e = self.event(EventKind::Decision, Some(i), None);
        e.claim = Some(claim);
        self.record(e);
        self.assign(i, claim)?;
        self.cascade()?;
        Ok(self.stop_reason())
    }

    pub fn trajectory(&self) -> Trajectory {
        Trajectory {
            events: self.events.clone(),
            end_state: self.end_state.clone().unwrap_or_else(|| self.state.clone()),
        }
    }

    pub fn summary(&self) -> SimSummary {
        let mut window = self.window.clone();
        window.state_time = self
            .state_time
            .iter()
            .map(|(s, t)| StateTime {
                state: s.clone(),
                time: *t,
            })
            .collect();
        SimSummary {
            horizon: self.path.horizon,
            offered: self.offered,
            admitted: self.admitted,
            blocked: self.blocked,
            completions: self.completions.clone(),
            initiations: self.next_draw as u64,
            occupancy_integral: self.occupancy_integral,
            end_state: self.end_state.clone().unwrap_or_else(|| self.state.clone()),
            window,
        }
    }

    pub fn into_parts(self) -> (Trajectory, SimSummary) {
        let summary = self.summary();
        let trajectory = Trajectory {
            end_state: summary.end_state.clone(),
            events: self.events,
        };
        (trajectory, summary)
    }

    fn peek(&self) -> Option<Next> {
        let mut best: Option<(usize, f64)> = None;
        for (i, s) in self.serving.iter().enumerate() {
            if let Some(s) = s {
                if best.is_none_or(|(_, t)| s.completes < t) {
                    best = Some((i, s.completes));
                }
            }
        }
        let arrival = if self.draining {
            None
        } else {
            self.path.arrivals.get(self.next_arrival).map(|a| a.epoch)
        };
        match (best, arrival) {
            (Some((i, tc)), Some(ta)) if tc <= ta => Some(Next::Completion(i, tc)),
            (_, Some(ta)) => Some(Next::Arrival(ta)),
            (Some((i, tc)), None) => Some(Next::Completion(i, tc)),
            (None, None) => None,
        }
    }

    fn process(&mut self, next: Next) -> Result<()> {
        match next {
            Next::Completion(i, t) => {
                self.advance_clock(t);
                self.complete(i)?;
            }
            Next::Arrival(t) => {
                self.advance_clock(t);
                self.arrive();
            }
        }
        self.cascade()
    }

    fn counting(&self) -> bool {
        !self.draining && self.time >= self.window.start
    }

    fn arrive(&mut self) {
        let group = self.path.arrivals[self.next_arrival].group_size;
        self.next_arrival += 1;
        let admitted = admit_count(&self.state, group, self.params.rooms);
        let counting = self.counting();
        for k in 0..group {
            let p = self.next_patient;
            self.next_patient += 1;
            self.offered += 1;
            if counting {
                self.window.offered += 1;
            }
            self.record(self.event(EventKind::Arrival, None, Some(p)));
            if k < admitted {
                self.admitted += 1;
                if counting {
                    self.window.admitted += 1;
                }
                self.admitted_at[p as usize] = self.time;
                self.unassigned.push_back(p);
                self.state.unassigned += 1;
                self.record(self.event(EventKind::Admission, None, Some(p)));
            } else {
                self.blocked += 1;
                if counting {
                    self.window.blocked += 1;
                }
                self.record(self.event(EventKind::Blocked, None, Some(p)));
            }
        }
    }

    fn complete(&mut self, i: usize) -> Result<()> {
        let done = self.serving[i].take().expect("completion of idle physician");
        self.state.caseloads[i] -= 1;
        let admitted = self.admitted_at[done.patient as usize];
        if admitted >= self.window.start {
            self.window.sojourn_sum += self.time - admitted;
            self.window.sojourn_count += 1;
        }
        if !self.draining {
            self.completions[i] += 1;
            if self.counting() {
                self.window.completions[i] += 1;
            }
            self.record(self.event(EventKind::Completion, Some(i), Some(done.patient)));
        }
        if !self.queues[i].is_empty() {
            self.start_next(i)?;
        }
        Ok(())
    }

    fn cascade(&mut self) -> Result<()> {
        while let Some(i) = next_decider(&self.state, &self.profile.decision_order) {
            let count = if self.options.external == Some(i) && !self.draining {
                if self.state.unassigned >= 2 {
                    self.pending = Some(i);
                    let mut e = self.event(EventKind::AwaitingDecision, Some(i), None);
                    e.claim = Some(self.state.unassigned.min(self.profile.rules[i].max_batch));
                    self.record(e);
                    return Ok(());
                }
                1
            } else {
                self.profile.rules[i].claim(i, &self.state)?
            };
            self.assign(i, count)?;
        }
        debug_assert!(
            self.state.unassigned == 0 || self.state.caseloads.iter().all(|a| *a > 0),
            "idle physician with waiting patients in {}",
            self.state
        );
        Ok(())
    }

    fn assign(&mut self, i: usize, count: u32) -> Result<()> {
        for _ in 0..count {
            let p = self.unassigned.pop_front().expect("claim within availability");
            self.queues[i].push_back(p);
            self.record(self.event(EventKind::Assignment, Some(i), Some(p)));
        }
        self.state.unassigned -= count;
        self.state.caseloads[i] += count;
        if self.serving[i].is_none() {
            self.start_next(i)?;
        }
        Ok(())
    }

    fn start_next(&mut self, i: usize) -> Result<()> {
        let p = self.queues[i].pop_front().expect("nonempty queue");
        let draw = *self
            .path
            .service_draws
            .get(self.next_draw)
            .ok_or(Error::DrawsExhausted(self.next_draw))?;
        self.next_draw += 1;
        self.serving[i] = Some(InService {
            patient: p,
            started: self.time,
            completes: self.time + draw,
        });
        if !self.draining {
            self.record(self.event(EventKind::ServiceStart, Some(i), Some(p)));
        }
        Ok(())
    }

    fn advance_clock(&mut self, t: f64) {
        if self.draining {
            self.time = t;
            return;
        }
        let t = t.min(self.path.horizon);
        let dt = t - self.integrated_to;
        if dt > 0.0 {
            let occ = self.state.occupancy() as f64;
            self.occupancy_integral += occ * dt;
            let lo = self.integrated_to.max(self.window.start);
            if t > lo {
                let w = t - lo;
                self.window.occupancy_integral += occ * w;
                *self.state_time.entry(self.state.clone()).or_insert(0.0) += w;
            }
            self.integrated_to = t;
        }
        self.time = t;
    }

    fn finish(&mut self) -> Result<()> {
        self.advance_clock(self.path.horizon);
        self.end_state = Some(self.state.clone());
        self.finished = true;
        if self.options.drain {
            self.draining = true;
            while let Some(next) = self.peek() {
                self.process(next)?;
            }
            self.time = self.path.horizon;
        }
        Ok(())
    }

    fn event(&self, kind: EventKind, physician: Option<usize>, patient: Option<u64>) -> Event {
        Event {
            t: self.time,
            kind,
            physician,
            patient,
            claim: None,
        }
    }

    fn record(&mut self, e: Event) {
        if self.options.record_events && !self.draining {
            self.events.push(e);
        }
    }
}

/// Replays `path` under `profile` over its whole horizon.
pub fn simulate(
    path: &SamplePath,
    params: &SystemParams,
    profile: &StrategyProfile,
) -> Result<(Trajectory, SimSummary)> {
    simulate_with(path, params, profile, SimOptions::default())
}

pub fn simulate_with(
    path: &SamplePath,
    params: &SystemParams,
    profile: &StrategyProfile,
    options: SimOptions,
) -> Result<(Trajectory, SimSummary)> {
    if options.external.is_some() {
        return Err(Error::Invalid(
            "external decisions need the step-wise simulator".into(),
        ));
    }
    let mut sim = Simulator::new(Arc::new(path.clone()), params, profile, options)?;
    sim.run()?;
    Ok(sim.into_parts())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::des::path::{generate_sample_path, Arrival};
    use crate::model::Strategy;

    fn params() -> SystemParams {
        SystemParams::experimental()
    }

    fn one_group_path(draws: Vec<f64>) -> SamplePath {
        SamplePath::explicit(
            params(),
            600.0,
            vec![Arrival {
                epoch: 0.0,
                group_size: 3,
            }],
            draws,
        )
    }

    #[test]
    fn empty_path_does_nothing() {
        let path = SamplePath::explicit(params(), 600.0, vec![], vec![]);
        let profile = StrategyProfile::experimental(Strategy::Batch);
        let (traj, summary) = simulate(&path, &params(), &profile).unwrap();
        assert!(traj.events.is_empty());
        assert_eq!(summary.total_completions(), 0);
        assert_eq!(summary.end_state, SystemState::new(0, vec![0, 0]));
    }

    #[test]
    fn batched_second_patient_starts_at_first_completion() {
        let path = one_group_path(vec![5.0, 7.0, 11.0]);
        let profile = StrategyProfile::experimental(Strategy::Batch);
        let (traj, summary) = simulate(&path, &params(), &profile).unwrap();
        // Partner claims first and gets patient 0 with draw 5; the focal
        // physician claims 1 and 2 and draws 7 then 11.
        let starts: Vec<_> = traj
            .events
            .iter()
            .filter(|e| e.kind == EventKind::ServiceStart && e.physician == Some(0))
            .map(|e| (e.patient.unwrap(), e.t))
            .collect();
        assert_eq!(starts, vec![(1, 0.0), (2, 7.0)]);
        let first_done = traj
            .events
            .iter()
            .find(|e| e.kind == EventKind::Completion && e.physician == Some(0))
            .unwrap();
        assert_eq!((first_done.patient, first_done.t), (Some(1), 7.0));
        assert_eq!(summary.completions, vec![2, 1]);
        assert_eq!(summary.initiations, 3);
    }

    #[test]
    fn ties_run_completions_before_arrivals() {
        let path = SamplePath::explicit(
            params(),
            600.0,
            vec![
                Arrival {
                    epoch: 0.0,
                    group_size: 3,
                },
                Arrival {
                    epoch: 10.0,
                    group_size: 3,
                },
            ],
            vec![10.0; 6],
        );
        let profile = StrategyProfile::experimental(Strategy::NoBatch);
        let (traj, _) = simulate(&path, &params(), &profile).unwrap();
        let at10: Vec<_> = traj.events.iter().filter(|e| e.t == 10.0).map(|e| e.kind).collect();
        assert_eq!(
            at10[..4],
            [
                EventKind::Completion,
                EventKind::Assignment,
                EventKind::ServiceStart,
                EventKind::Completion
            ]
        );
        // Occupancy before the arrival is 1 (patient 2 waits), so all three
        // new patients are admitted.
        assert_eq!(traj.count(EventKind::Blocked), 0);
    }

    #[test]
    fn conservation_and_jsonl_round_trip() {
        let p = params();
        for seed in 0..20 {
            let path = generate_sample_path(&p, seed, 600.0).unwrap();
            for s in [Strategy::Batch, Strategy::NoBatch] {
                let (traj, sum) =
                    simulate(&path, &p, &StrategyProfile::experimental(s)).unwrap();
                assert_eq!(
                    sum.admitted,
                    sum.total_completions() + sum.end_state.occupancy() as u64
                );
                assert_eq!(sum.offered, sum.admitted + sum.blocked);
                assert_eq!(sum.offered, path.offered_patients());
                assert_eq!(parse_jsonl(&traj.to_jsonl()).unwrap(), traj.events);
            }
        }
    }

    #[test]
    fn draws_follow_initiation_order() {
        let p = params();
        let path = generate_sample_path(&p, 11, 600.0).unwrap();
        let (traj, _) =
            simulate(&path, &p, &StrategyProfile::experimental(Strategy::Batch)).unwrap();
        let mut started = std::collections::HashMap::new();
        let mut k = 0;
        for e in &traj.events {
            match e.kind {
                EventKind::ServiceStart => {
                    started.insert(e.patient.unwrap(), (e.t, path.service_draws[k]));
                    k += 1;
                }
                EventKind::Completion => {
                    let (t0, s) = started[&e.patient.unwrap()];
                    assert!((e.t - t0 - s).abs() < 1e-9);
                }
                _ => {}
            }
        }
    }

    #[test]
    fn exhausted_draws_are_an_error() {
        let path = one_group_path(vec![5.0]);
        let profile = StrategyProfile::experimental(Strategy::Batch);
        let err = simulate(&path, &params(), &profile).unwrap_err();
        assert_eq!(err, Error::DrawsExhausted(1));
    }

    #[test]
    fn external_decisions_pause_the_clock() {
        let path = Arc::new(one_group_path(vec![5.0, 7.0, 11.0]));
        let profile = StrategyProfile::experimental(Strategy::NoBatch);
        let opts = SimOptions {
            external: Some(0),
            ..SimOptions::default()
        };
        let mut sim = Simulator::new(path, &params(), &profile, opts).unwrap();
        let stop = sim.run().unwrap();
        assert_eq!(
            stop,
            Stop::AwaitingDecision {
                physician: 0,
                available: 2
            }
        );
        assert_eq!(sim.state(), &SystemState::new(2, vec![0, 1]));
        assert!(sim.submit(3).is_err());
        assert_eq!(sim.submit(2).unwrap(), Stop::Running);
        assert_eq!(sim.state(), &SystemState::new(0, vec![2, 1]));
        assert_eq!(sim.run().unwrap(), Stop::Finished);
        assert_eq!(sim.time(), 600.0);
    }

    #[test]
    fn warmup_window_and_drain() {
        let p = params();
        let path = generate_sample_path(&p, 3, 2000.0).unwrap();
        let opts = SimOptions {
            record_events: false,
            warmup: 500.0,
            drain: true,
            external: None,
        };
        let profile = StrategyProfile::experimental(Strategy::NoBatch);
        let (traj, sum) = simulate_with(&path, &p, &profile, opts).unwrap();
        assert!(traj.events.is_empty());
        let w = &sum.window;
        assert_eq!(w.length(), 1500.0);
        let total: f64 = w.state_time.iter().map(|s| s.time).sum();
        assert!((total - 1500.0).abs() < 1e-9);
        assert_eq!(w.sojourn_count, w.admitted);
        assert!(w.admitted <= sum.admitted);
    }

    #[test]
    fn slicing_the_clock_does_not_change_results() {
        let p = params();
        let path = Arc::new(generate_sample_path(&p, 9, 600.0).unwrap());
        let profile = StrategyProfile::experimental(Strategy::Batch);
        let mut whole = Simulator::new(path.clone(), &p, &profile, SimOptions::default()).unwrap();
        whole.run().unwrap();
        let mut sliced = Simulator::new(path, &p, &profile, SimOptions::default()).unwrap();
        let mut t = 0.0;
        while !sliced.is_finished() {
            t += 0.37;
            sliced.run_until(t).unwrap();
            assert!(sliced.time() <= t + 1e-12);
        }
        assert_eq!(whole.summary(), sliced.summary());
        assert_eq!(whole.events(), sliced.events());
    }

}
