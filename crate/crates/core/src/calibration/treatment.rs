use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::money::Money;
use crate::ctmc::{build_generator, solve_poisson};
use crate::error::{Error, Result};
use crate::model::{RewardSpec, Strategy, StrategyProfile, SystemParams, SystemState};

pub const SHIFT_LENGTH: f64 = 600.0;

/// Shown before each decision in the nudge treatment.
pub const NUDGE_TEXT: &str = "If you choose Strategy 2 (Self-assign 2 patients whenever possible), \
the following can occur: While you are treating your two patients, your partner becomes idle \
and is not treating any patients.";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum TreatmentKind {
    #[serde(rename = "IT")]
    It,
    #[serde(rename = "GT")]
    Gt,
    #[serde(rename = "GT_NUDGE")]
    GtNudge,
    #[serde(rename = "GT_ST")]
    GtSt,
}

impl TreatmentKind {
    pub const ALL: [TreatmentKind; 4] = [
        TreatmentKind::It,
        TreatmentKind::Gt,
        TreatmentKind::GtNudge,
        TreatmentKind::GtSt,
    ];

    /// The payoff-maximizing strategy of the focal physician.
    pub fn optimal(self) -> Strategy {
        match self {
            TreatmentKind::It => Strategy::Batch,
            _ => Strategy::NoBatch,
        }
    }

    /// Reward whose cumulative value is the treatment's performance metric.
    pub fn reward(self) -> RewardSpec {
        match self {
            TreatmentKind::It => RewardSpec::PersonalThroughput { focal: 0 },
            TreatmentKind::Gt | TreatmentKind::GtNudge => RewardSpec::GroupThroughput,
            TreatmentKind::GtSt => RewardSpec::Occupancy,
        }
    }

    /// Lower metric is better (time in system rather than patients treated).
    pub fn is_time_based(self) -> bool {
        self == TreatmentKind::GtSt
    }

    pub fn label(self) -> &'static str {
        match self {
            TreatmentKind::It => "IT",
            TreatmentKind::Gt => "GT",
            TreatmentKind::GtNudge => "GT-Nudge",
            TreatmentKind::GtSt => "GT-ST",
        }
    }

    pub fn metric_unit(self) -> &'static str {
        if self.is_time_based() {
            "time units"
        } else {
            "patients"
        }
    }
}

impl fmt::Display for TreatmentKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

impl FromStr for TreatmentKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_uppercase().replace('-', "_").as_str() {
            "IT" => Ok(TreatmentKind::It),
            "GT" => Ok(TreatmentKind::Gt),
            "GT_NUDGE" => Ok(TreatmentKind::GtNudge),
            "GT_ST" => Ok(TreatmentKind::GtSt),
            _ => Err(Error::Invalid(format!("unknown treatment {s:?}"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TerminalCredit {
    pub state: SystemState,
    pub credit: f64,
}

/// End-of-shift credit per stable state.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct TerminalTable {
    pub entries: Vec<TerminalCredit>,
}

impl TerminalTable {
    pub fn credit(&self, state: &SystemState) -> Option<f64> {
        self.entries
            .iter()
            .find(|e| &e.state == state)
            .map(|e| e.credit)
    }

    pub fn credits(&self) -> Vec<f64> {
        self.entries.iter().map(|e| e.credit).collect()
    }

    /// Waiting / your patients / partner's patients, then the credit.
    pub fn render(&self, unit: &str, decimals: usize) -> String {
        let mut out = format!(
            "{:>8} {:>14} {:>18} {:>12}\n",
            "waiting", "your patients", "partner's patients", unit
        );
        for e in &self.entries {
            let a = &e.state.caseloads;
            out.push_str(&format!(
                "{:>8} {:>14} {:>18} {:>12.*}\n",
                e.state.unassigned,
                a.first().copied().unwrap_or(0),
                a.get(1..).map_or(0, |r| r.iter().sum::<u32>()),
                decimals,
                e.credit
            ));
        }
        out
    }
}

/// Relative values of `reward` under `profile`, zero at the empty state,
/// over every stable state of the generator.
pub fn terminal_adjustment_table(
    params: &SystemParams,
    reward: &RewardSpec,
    profile: &StrategyProfile,
) -> Result<TerminalTable> {
    let gen = build_generator(params, profile)?;
    let sol = solve_poisson(&gen, reward, &params.empty_state())?;
    Ok(TerminalTable {
        entries: gen
            .states
            .iter()
            .zip(&sol.relative_values)
            .map(|(s, h)| TerminalCredit {
                state: s.clone(),
                credit: *h,
            })
            .collect(),
    })
}

/// One payoff scheme of the experiment.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TreatmentSpec {
    pub kind: TreatmentKind,
    pub base_fee: Money,
    /// Patients for throughput treatments, time units for the sojourn one.
    pub threshold: f64,
    pub per_unit: Money,
    pub horizon: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub nudge_text: Option<String>,
    pub terminal_table: TerminalTable,
    #[serde(default = "SystemParams::experimental")]
    pub params: SystemParams,
}

impl TreatmentSpec {
    /// The published parameters: $2.00 base fee and
    /// IT $0.24 per patient beyond 6, GT $0.60 per patient beyond 36,
    /// GT-ST $0.014 per time unit below 1200, over a 600-unit shift.
    pub fn paper(kind: TreatmentKind) -> Result<Self> {
        let (threshold, per_unit) = match kind {
            TreatmentKind::It => (6.0, Money::from_cents(24)),
            TreatmentKind::Gt | TreatmentKind::GtNudge => (36.0, Money::from_cents(60)),
            TreatmentKind::GtSt => (1200.0, Money::from_mills(14)),
        };
        Self::with_terms(
            kind,
            SystemParams::experimental(),
            Money::from_cents(200),
            threshold,
            per_unit,
            SHIFT_LENGTH,
        )
    }

    /// Builds a spec whose terminal table is computed under the treatment's
    /// optimal profile with the matching reward.
    pub fn with_terms(
        kind: TreatmentKind,
        params: SystemParams,
        base_fee: Money,
        threshold: f64,
        per_unit: Money,
        horizon: f64,
    ) -> Result<Self> {
        let profile = StrategyProfile::experimental(kind.optimal());
        let terminal_table = terminal_adjustment_table(&params, &kind.reward(), &profile)?;
        let spec = Self {
            kind,
            base_fee,
            threshold,
            per_unit,
            horizon,
            nudge_text: (kind == TreatmentKind::GtNudge).then(|| NUDGE_TEXT.to_string()),
            terminal_table,
            params,
        };
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<()> {
        if self.per_unit <= Money::ZERO {
            return Err(Error::Invalid(format!("per_unit must be > 0, got {}", self.per_unit)));
        }
        if !(self.horizon.is_finite() && self.horizon > 0.0) {
            return Err(Error::Invalid(format!("horizon must be > 0, got {}", self.horizon)));
        }
        if !(self.threshold.is_finite() && self.threshold >= 0.0) {
            return Err(Error::Invalid(format!("bad threshold {}", self.threshold)));
        }
        if self.nudge_text.is_some() != (self.kind == TreatmentKind::GtNudge) {
            return Err(Error::Invalid(
                "nudge text belongs to the nudge treatment only".into(),
            ));
        }
        self.params.validate()
    }

    /// Linear bonus in dollars for a metric value; may be negative.
    pub fn linear_bonus(&self, metric: f64) -> f64 {
        let over = if self.kind.is_time_based() {
            self.threshold - metric
        } else {
            metric - self.threshold
        };
        self.per_unit.dollars() * over
    }

    /// Bonus actually paid for a realized metric: never negative.
    pub fn realized_bonus(&self, metric: f64) -> Money {
        Money::from_dollars(self.linear_bonus(metric)).max(Money::ZERO)
    }

    /// Plain-language payment rule for participant-facing screens.
    pub fn describe(&self) -> String {
        match self.kind {
            TreatmentKind::It => format!(
                "{} for each patient you treat beyond a threshold of {} patients",
                self.per_unit, self.threshold
            ),
            TreatmentKind::Gt | TreatmentKind::GtNudge => format!(
                "{} for each patient treated by you or your partner beyond a joint threshold of {} patients",
                self.per_unit, self.threshold
            ),
            TreatmentKind::GtSt => format!(
                "{} for each time unit by which total patient time in the system falls below a target of {} time units",
                self.per_unit, self.threshold
            ),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn st(s: &str) -> SystemState {
        s.parse().unwrap()
    }

    #[test]
    fn kinds_parse_in_several_spellings() {
        assert_eq!("gt-nudge".parse::<TreatmentKind>().unwrap(), TreatmentKind::GtNudge);
        assert_eq!("GT_ST".parse::<TreatmentKind>().unwrap(), TreatmentKind::GtSt);
        assert!("XX".parse::<TreatmentKind>().is_err());
        assert_eq!(serde_json::to_string(&TreatmentKind::GtNudge).unwrap(), "\"GT_NUDGE\"");
    }

    #[test]
    fn it_table_entries() {
        let spec = TreatmentSpec::paper(TreatmentKind::It).unwrap();
        let t = &spec.terminal_table;
        assert_eq!(t.entries.len(), 9);
        assert_eq!(t.credit(&st("(0,0,0)")), Some(0.0));
        assert!((t.credit(&st("(1,2,1)")).unwrap() - 1.294).abs() < 5e-4);
        assert!((t.credit(&st("(2,1,1)")).unwrap() - 1.294).abs() < 5e-4);
        let d = t.credit(&st("(0,2,1)")).unwrap() - t.credit(&st("(1,1,1)")).unwrap();
        assert!((d - 0.182).abs() < 5e-4);
    }

    #[test]
    fn group_table_is_symmetric_in_physicians() {
        let spec = TreatmentSpec::paper(TreatmentKind::Gt).unwrap();
        let t = &spec.terminal_table;
        let a = t.credit(&st("(0,0,1)")).unwrap();
        let b = t.credit(&st("(0,1,0)")).unwrap();
        assert!((a - b).abs() < 1e-12);
        assert!((a - 0.82).abs() < 0.005);
    }

    #[test]
    fn nudge_only_differs_by_text() {
        let gt = TreatmentSpec::paper(TreatmentKind::Gt).unwrap();
        let mut nudge = TreatmentSpec::paper(TreatmentKind::GtNudge).unwrap();
        assert!(nudge.nudge_text.as_deref().unwrap().contains("partner becomes idle"));
        nudge.kind = TreatmentKind::Gt;
        nudge.nudge_text = None;
        assert_eq!(nudge, gt);
    }

    #[test]
    fn bonuses() {
        let it = TreatmentSpec::paper(TreatmentKind::It).unwrap();
        assert_eq!(it.realized_bonus(10.0), Money::from_cents(96));
        assert_eq!(it.realized_bonus(3.0), Money::ZERO);
        assert!((it.linear_bonus(3.0) + 0.72).abs() < 1e-12);
        let st = TreatmentSpec::paper(TreatmentKind::GtSt).unwrap();
        assert_eq!(st.realized_bonus(1100.0), Money::from_cents(140));
        assert_eq!(st.realized_bonus(1300.0), Money::ZERO);
    }

    #[test]
    fn spec_round_trips_through_json() {
        let spec = TreatmentSpec::paper(TreatmentKind::GtSt).unwrap();
        let back: TreatmentSpec =
            serde_json::from_str(&serde_json::to_string(&spec).unwrap()).unwrap();
        assert_eq!(back, spec);
    }

    #[test]
    fn validation() {
        let mut spec = TreatmentSpec::paper(TreatmentKind::It).unwrap();
        spec.per_unit = Money::ZERO;
        assert!(spec.validate().is_err());
        let mut spec = TreatmentSpec::paper(TreatmentKind::Gt).unwrap();
        spec.nudge_text = Some("x".into());
        assert!(spec.validate().is_err());
    }

    #[test]
    fn table_renders_one_row_per_state() {
        let spec = TreatmentSpec::paper(TreatmentKind::It).unwrap();
        let text = spec.terminal_table.render("patients", 3);
        assert_eq!(text.lines().count(), 10);
        assert!(text.contains("1.294"));
    }
}
