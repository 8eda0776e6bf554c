//! Discrete-event simulation on explicit sample paths, the pathwise
//! coupling harness, batch labelling of assignment logs and Monte Carlo
//! estimates of the long-run metrics.

mod batches;
mod coupling;
mod estimate;
mod path;
mod sim;

pub use batches::{assignments, classify_assignments, classify_batches, Assignment, BatchLabel};
pub use coupling::{
    count_process, couple, Checkpoint, Counts, CouplingReport, Violation, ViolationCounts,
};
pub use estimate::{estimate_metrics, Estimate, EstimateOptions, MonteCarloReport, StateEstimate};
pub use path::{
    generate_sample_path, generate_sample_path_with, regenerate, Arrival, Distribution, PathLaws,
    PathMeta, SamplePath,
};
pub use sim::{
    parse_jsonl, simulate, simulate_with, Event, EventKind, InService, SimOptions, SimSummary,
    Simulator, StateTime, Stop, Trajectory, WindowStats,
};
