//! Interactive shifts: a human plays physician 0 against the assign-one
//! partner, either deciding at every prompt (live) or committing to one
//! strategy up front (committed).

use std::fmt;
use std::str::FromStr;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::calibration::{Money, TreatmentKind, TreatmentSpec, SHIFT_LENGTH};
use crate::des::{
    generate_sample_path, regenerate, Event, EventKind, PathMeta, SamplePath, SimOptions,
    Simulator, Stop,
};
use crate::error::{Error, Result};
use crate::model::{Strategy, StrategyProfile, SystemParams, SystemState};

pub const FOCAL: usize = 0;
pub const PARTNER: usize = 1;

/// Model time units shown per wall-clock second.
pub const UNITS_PER_SECOND: f64 = 5.0;

/// Fixed paths offered to participants, by id.
pub const REGISTERED_PATHS: [(&str, u64); 2] = [("path-1", 4098), ("path-2", 8803)];

/// Experimental path registered under `id`.
pub fn registered_path(id: &str) -> Result<SamplePath> {
    let seed = REGISTERED_PATHS
        .iter()
        .find(|(name, _)| *name == id)
        .map(|(_, seed)| *seed)
        .ok_or_else(|| Error::UnknownPath(id.to_string()))?;
    generate_sample_path(&SystemParams::experimental(), seed, SHIFT_LENGTH)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Mode {
    Live,
    Committed,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CommittedStrategy {
    AssignOne,
    AssignTwo,
}

impl CommittedStrategy {
    pub fn strategy(self) -> Strategy {
        match self {
            CommittedStrategy::AssignOne => Strategy::NoBatch,
            CommittedStrategy::AssignTwo => Strategy::Batch,
        }
    }
}

impl fmt::Display for CommittedStrategy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            CommittedStrategy::AssignOne => "assign_one",
            CommittedStrategy::AssignTwo => "assign_two",
        })
    }
}

impl FromStr for CommittedStrategy {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().replace('-', "_").as_str() {
            "assign_one" | "1" => Ok(CommittedStrategy::AssignOne),
            "assign_two" | "2" => Ok(CommittedStrategy::AssignTwo),
            _ => Err(Error::Invalid(format!("unknown strategy {s:?}"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SessionStatus {
    Running,
    AwaitingDecision,
    Finished,
}

/// How far to move the clock.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "snake_case")]
pub enum Advance {
    /// One event.
    Step,
    /// `seconds * 5` model units, stopping early at a decision.
    WallSeconds { seconds: f64 },
    /// Until the next decision or the end of the shift.
    ToDecision,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DecisionRecord {
    pub t: f64,
    /// State when the prompt appeared.
    pub state: SystemState,
    pub available: u32,
    pub claim: u32,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LogHeader {
    pub session: String,
    pub mode: Mode,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub path_id: Option<String>,
    pub path: PathMeta,
    pub treatment: TreatmentSpec,
}

/// One line of a session log.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "record", rename_all = "snake_case")]
pub enum LogRecord {
    Header(LogHeader),
    Commit { t: f64, strategy: CommittedStrategy },
    Decision(DecisionRecord),
    Event(Event),
    Payoff(Payoff),
}

/// Itemized earnings of a finished shift.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Payoff {
    pub treatment: TreatmentKind,
    pub unit: String,
    /// Patients treated (or patient time) during the shift.
    pub raw_metric: f64,
    pub end_state: SystemState,
    pub terminal_credit: f64,
    pub metric: f64,
    pub threshold: f64,
    pub per_unit: Money,
    /// Units beyond (or below, for time) the threshold that earn the rate.
    pub units_paid: f64,
    pub bonus: Money,
    pub base_fee: Money,
    pub total: Money,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PatientCard {
    pub id: u64,
    pub time_in_system: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Activity {
    Idle,
    Treating,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PhysicianView {
    pub status: Activity,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub patient: Option<u64>,
    /// Share of the current treatment already done, in `[0, 1]`.
    pub progress: f64,
    /// Claimed patients not yet started.
    pub waiting: Vec<u64>,
    pub completions: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PendingDecision {
    pub available: u32,
    pub max_claim: u32,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TreatmentView {
    pub kind: TreatmentKind,
    pub label: String,
    pub description: String,
    pub base_fee: Money,
    pub threshold: f64,
    pub per_unit: Money,
    pub unit: String,
}

/// What the participant sees. Built only from the past of the run: no
/// upcoming arrivals and no unused service draws.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SessionView {
    pub id: String,
    pub mode: Mode,
    pub status: SessionStatus,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub committed_strategy: Option<CommittedStrategy>,
    pub clock: f64,
    pub horizon: f64,
    pub units_per_second: f64,
    pub state: SystemState,
    pub unassigned: Vec<PatientCard>,
    pub focal: PhysicianView,
    pub partner: PhysicianView,
    pub completions: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub pending_decision: Option<PendingDecision>,
    pub treatment: TreatmentView,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub nudge_text: Option<String>,
}

#[derive(Debug, Clone)]
pub struct Session {
    id: String,
    mode: Mode,
    path_id: Option<String>,
    treatment: TreatmentSpec,
    committed: Option<CommittedStrategy>,
    sim: Simulator,
    decisions: Vec<DecisionRecord>,
    /// Events already logged when each decision was made.
    decided_after: Vec<usize>,
}

fn live_profile() -> StrategyProfile {
    // The focal rule is never consulted for two or more waiting patients;
    // it only fixes the option set at a batch of two.
    StrategyProfile::experimental(Strategy::NoBatch)
}

impl Session {
    pub fn new(
        id: impl Into<String>,
        treatment: TreatmentSpec,
        mode: Mode,
        path: Arc<SamplePath>,
        path_id: Option<String>,
    ) -> Result<Self> {
        treatment.validate()?;
        if path.params != treatment.params {
            return Err(Error::Invalid(
                "path and treatment use different model parameters".into(),
            ));
        }
        if path.horizon != treatment.horizon {
            return Err(Error::Invalid(format!(
                "path horizon {} differs from shift length {}",
                path.horizon, treatment.horizon
            )));
        }
        let options = SimOptions {
            external: (mode == Mode::Live).then_some(FOCAL),
            ..SimOptions::default()
        };
        let sim = Simulator::new(path, &treatment.params, &live_profile(), options)?;
        Ok(Self {
            id: id.into(),
            mode,
            path_id,
            treatment,
            committed: None,
            sim,
            decisions: Vec::new(),
            decided_after: Vec::new(),
        })
    }

    pub fn id(&self) -> &str {
        &self.id
    }

    pub fn mode(&self) -> Mode {
        self.mode
    }

    pub fn treatment(&self) -> &TreatmentSpec {
        &self.treatment
    }

    pub fn committed_strategy(&self) -> Option<CommittedStrategy> {
        self.committed
    }

    pub fn header(&self) -> LogHeader {
        LogHeader {
            session: self.id.clone(),
            mode: self.mode,
            path_id: self.path_id.clone(),
            path: self.sim.path().meta(),
            treatment: self.treatment.clone(),
        }
    }

    pub fn decisions(&self) -> &[DecisionRecord] {
        &self.decisions
    }

    pub fn events(&self) -> &[Event] {
        self.sim.events()
    }

    pub fn status(&self) -> SessionStatus {
        if self.sim.is_finished() {
            SessionStatus::Finished
        } else if self.sim.pending().is_some() {
            SessionStatus::AwaitingDecision
        } else {
            SessionStatus::Running
        }
    }

    /// Live: moves the clock, pausing at focal decisions. Committed: only
    /// valid once a strategy is set, which already ran the shift.
    pub fn advance(&mut self, how: Advance) -> Result<SessionView> {
        match self.status() {
            SessionStatus::Finished => return Err(Error::Conflict("the shift is over".into())),
            SessionStatus::AwaitingDecision => {
                return Err(Error::Conflict("a decision is pending".into()))
            }
            SessionStatus::Running => {}
        }
        if self.mode == Mode::Committed {
            return Err(Error::Conflict(
                "commit a strategy before starting the shift".into(),
            ));
        }
        match how {
            Advance::Step => self.sim.step()?,
            Advance::WallSeconds { seconds } => {
                if !(seconds.is_finite() && seconds >= 0.0) {
                    return Err(Error::Invalid(format!("bad wall-clock step {seconds}")));
                }
                let target = self.sim.time() + seconds * UNITS_PER_SECOND;
                self.sim.run_until(target)?
            }
            Advance::ToDecision => self.sim.run()?,
        };
        Ok(self.view())
    }

    pub fn submit_decision(&mut self, claim: u32) -> Result<SessionView> {
        let Some(i) = self.sim.pending() else {
            return Err(Error::Conflict("no decision is pending".into()));
        };
        let state = self.sim.state().clone();
        let logged = self.sim.events().len();
        self.sim.submit(claim)?;
        self.decided_after.push(logged);
        self.decisions.push(DecisionRecord {
            t: self.sim.time(),
            available: state.unassigned,
            state,
            claim,
        });
        debug_assert_eq!(i, FOCAL);
        Ok(self.view())
    }

    /// Fixes the focal strategy and runs the whole shift with it.
    pub fn commit(&mut self, strategy: CommittedStrategy) -> Result<SessionView> {
        if self.mode != Mode::Committed {
            return Err(Error::Conflict(
                "strategies are committed only in committed-mode sessions".into(),
            ));
        }
        if self.committed.is_some() {
            return Err(Error::Conflict("a strategy is already committed".into()));
        }
        let path = Arc::new(self.sim.path().clone());
        let mut sim = Simulator::new(
            path,
            &self.treatment.params,
            &StrategyProfile::experimental(strategy.strategy()),
            SimOptions::default(),
        )?;
        sim.run()?;
        self.sim = sim;
        self.committed = Some(strategy);
        Ok(self.view())
    }

    pub fn payoff(&self) -> Result<Payoff> {
        if !self.sim.is_finished() {
            return Err(Error::Conflict("the shift is not finished".into()));
        }
        let spec = &self.treatment;
        let summary = self.sim.summary();
        let (raw, credit) = crate::calibration::realized_metric(spec, &summary)?;
        let metric = raw + credit;
        let over = if spec.kind.is_time_based() {
            spec.threshold - metric
        } else {
            metric - spec.threshold
        };
        let bonus = spec.realized_bonus(metric);
        Ok(Payoff {
            treatment: spec.kind,
            unit: spec.kind.metric_unit().into(),
            raw_metric: raw,
            end_state: summary.end_state,
            terminal_credit: credit,
            metric,
            threshold: spec.threshold,
            per_unit: spec.per_unit,
            units_paid: over.max(0.0),
            bonus,
            base_fee: spec.base_fee,
            total: spec.base_fee + bonus,
        })
    }

    pub fn view(&self) -> SessionView {
        let now = self.sim.time();
        let physician = |i: usize| {
            let serving = self.sim.in_service(i);
            let progress = serving.map_or(0.0, |s| {
                let span = s.completes - s.started;
                if span > 0.0 {
                    ((now - s.started) / span).clamp(0.0, 1.0)
                } else {
                    1.0
                }
            });
            PhysicianView {
                status: if serving.is_some() {
                    Activity::Treating
                } else {
                    Activity::Idle
                },
                patient: serving.map(|s| s.patient),
                progress,
                waiting: self.sim.queued(i),
                completions: self.sim.completions()[i],
            }
        };
        let pending = self.sim.pending().map(|i| {
            let available = self.sim.state().unassigned;
            PendingDecision {
                available,
                max_claim: available.min(self.sim.profile().rules[i].max_batch),
            }
        });
        let spec = &self.treatment;
        SessionView {
            id: self.id.clone(),
            mode: self.mode,
            status: self.status(),
            committed_strategy: self.committed,
            clock: now,
            horizon: spec.horizon,
            units_per_second: UNITS_PER_SECOND,
            state: self.sim.state().clone(),
            unassigned: self
                .sim
                .unassigned_patients()
                .into_iter()
                .map(|(id, at)| PatientCard {
                    id,
                    time_in_system: now - at,
                })
                .collect(),
            focal: physician(FOCAL),
            partner: physician(PARTNER),
            completions: self.sim.completions().iter().sum(),
            pending_decision: pending,
            treatment: TreatmentView {
                kind: spec.kind,
                label: spec.kind.label().into(),
                description: spec.describe(),
                base_fee: spec.base_fee,
                threshold: spec.threshold,
                per_unit: spec.per_unit,
                unit: spec.kind.metric_unit().into(),
            },
            nudge_text: spec.nudge_text.clone(),
        }
    }

    /// Header, commitment, then events with each decision placed right
    /// after the prompt it answered, and (once finished) the payoff.
    pub fn log(&self) -> Vec<LogRecord> {
        let mut out = vec![LogRecord::Header(self.header())];
        if let Some(strategy) = self.committed {
            out.push(LogRecord::Commit { t: 0.0, strategy });
        }
        let events = self.sim.events();
        let mut next = 0;
        for (d, &at) in self.decisions.iter().zip(&self.decided_after) {
            out.extend(events[next..at].iter().cloned().map(LogRecord::Event));
            out.push(LogRecord::Decision(d.clone()));
            next = at;
        }
        out.extend(events[next..].iter().cloned().map(LogRecord::Event));
        if let Ok(p) = self.payoff() {
            out.push(LogRecord::Payoff(p));
        }
        out
    }

    pub fn log_jsonl(&self) -> String {
        to_jsonl(&self.log())
    }
}

pub fn to_jsonl(records: &[LogRecord]) -> String {
    let mut out = String::new();
    for r in records {
        out.push_str(&serde_json::to_string(r).expect("log records serialize"));
        out.push('\n');
    }
    out
}

pub fn parse_log(text: &str) -> Result<Vec<LogRecord>> {
    text.lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(n, l)| {
            serde_json::from_str(l)
                .map_err(|e| Error::Invalid(format!("log line {}: {e}", n + 1)))
        })
        .collect()
}

/// Rebuilds a session from its log by regenerating the path and feeding
/// the recorded commitment and decisions back in. The result is finished
/// if the original was.
pub fn replay(records: &[LogRecord]) -> Result<Session> {
    let Some(LogRecord::Header(h)) = records.first() else {
        return Err(Error::Invalid("log does not start with a header".into()));
    };
    let path = Arc::new(regenerate(&h.path)?);
    let mut session = Session::new(
        h.session.clone(),
        h.treatment.clone(),
        h.mode,
        path,
        h.path_id.clone(),
    )?;
    let finished = records.iter().any(|r| matches!(r, LogRecord::Payoff(_)));
    for r in &records[1..] {
        match r {
            LogRecord::Commit { strategy, .. } => {
                session.commit(*strategy)?;
            }
            LogRecord::Decision(d) => {
                session.sim.run()?;
                if session.sim.pending().is_none() || session.sim.time() != d.t {
                    return Err(Error::Invalid(format!(
                        "replay diverged: no decision pending at t = {}",
                        d.t
                    )));
                }
                session.submit_decision(d.claim)?;
            }
            _ => {}
        }
    }
    if session.mode == Mode::Live {
        if finished {
            session.sim.run()?;
        } else {
            let last = records.iter().rev().find_map(|r| match r {
                LogRecord::Event(e) => Some(e.t),
                _ => None,
            });
            if let Some(t) = last {
                session.sim.run_until(t)?;
            }
        }
    }
    Ok(session)
}

/// Number of awaiting-decision prompts in a log.
pub fn prompt_count(records: &[LogRecord]) -> usize {
    records
        .iter()
        .filter(|r| matches!(r, LogRecord::Event(e) if e.kind == EventKind::AwaitingDecision))
        .count()
}

impl Session {
    /// Plays a live session to the end, answering every prompt with `claim`
    /// (capped at what is available).
    pub fn play_out(&mut self, claim: u32) -> Result<Payoff> {
        while self.status() != SessionStatus::Finished {
            if let Stop::AwaitingDecision { available, .. } = self.sim.run()? {
                self.submit_decision(claim.min(available))?;
            }
        }
        self.payoff()
    }
}
