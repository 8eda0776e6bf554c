use serde::{Deserialize, Serialize};

use super::generator::build_generator;
use super::solve::steady_state;
use crate::error::Result;
use crate::model::{StrategyProfile, SystemParams};

/// Long-run system performance of one profile.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    /// Completions (= admissions) per time unit.
    pub system_throughput: f64,
    pub individual_throughput: Vec<f64>,
    /// Time-average number of patients in rooms.
    pub mean_occupancy: f64,
    /// Mean admission-to-completion time of admitted patients.
    pub mean_sojourn: f64,
    /// Fraction of arriving patients turned away.
    pub blocking_rate: f64,
}

impl MetricsReport {
    /// `E[N] - Lambda * E[W]`; zero up to rounding.
    pub fn little_gap(&self) -> f64 {
        self.mean_occupancy - self.system_throughput * self.mean_sojourn
    }
}

pub fn metrics(params: &SystemParams, profile: &StrategyProfile) -> Result<MetricsReport> {
    let gen = build_generator(params, profile)?;
    let pi = steady_state(&gen)?;
    let mu = params.service_rate;

    let mut individual = vec![0.0; params.physicians];
    let mut occupancy = 0.0;
    for (s, p) in pi.iter() {
        for (i, a) in s.caseloads.iter().enumerate() {
            if *a > 0 {
                individual[i] += p * mu;
            }
        }
        occupancy += p * s.occupancy() as f64;
    }
    let throughput: f64 = individual.iter().sum();
    let offered = params.arrival_rate * params.mean_group_size();
    Ok(MetricsReport {
        system_throughput: throughput,
        individual_throughput: individual,
        mean_occupancy: occupancy,
        mean_sojourn: occupancy / throughput,
        blocking_rate: 1.0 - throughput / offered,
    })
}
