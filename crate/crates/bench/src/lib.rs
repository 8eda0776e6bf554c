//! Fixtures shared by the benchmarks.

use batchlab::des::{generate_sample_path, SamplePath};
use batchlab::{StrategyProfile, SystemParams};

/// A larger configuration than the experiment: 12 rooms, 3 physicians,
/// groups of one to three.
pub fn wide_params() -> SystemParams {
    SystemParams {
        rooms: 12,
        physicians: 3,
        arrival_rate: 0.08,
        group_dist: vec![0.5, 0.3, 0.2],
        service_rate: 1.0 / 15.0,
    }
}

pub fn wide_profile() -> StrategyProfile {
    StrategyProfile::all_assign_one(3, 2)
}

pub fn shift(seed: u64) -> SamplePath {
    generate_sample_path(&SystemParams::experimental(), seed, 600.0).expect("valid experimental path")
}
