//! Payoff schemes of the four experimental treatments, their terminal
//! credit tables, expected-bonus calibration and the selection of
//! representative sample paths.

mod expected;
mod money;
mod paths;
mod treatment;

pub use expected::{
    calibrate, calibration_report, check_threshold, expected_bonus, expected_metric,
    expected_metric_stationary, expected_metric_with_table, incentive_strength, realized_metric,
    CalibrationReport, CalibrationTargets, ThresholdCheck,
};
pub use money::Money;
pub use paths::{realized_strengths, select_sample_paths, RealizedStrength, SelectedPath};
pub use treatment::{
    terminal_adjustment_table, TerminalCredit, TerminalTable, TreatmentKind, TreatmentSpec,
    NUDGE_TEXT, SHIFT_LENGTH,
};
