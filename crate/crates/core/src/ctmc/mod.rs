//! Exact analysis of the collapsed continuous-time Markov chain: generator
//! construction, stationary and transient distributions, Poisson equations
//! for average-reward processes, and long-run system metrics.

mod closed_form;
mod generator;
mod linalg;
mod metrics;
mod solve;
mod transient;

pub use closed_form::{
    closed_form_deltas, delta_report, enumerate_profiles, focal_policy_family, numeric_deltas,
    verify_proposition1, DeltaReport, Deltas, OptimalityReport,
};
pub use generator::{build_generator, build_generator_bounded, Generator, DEFAULT_MAX_STATES};
pub use metrics::{metrics, MetricsReport};
pub use solve::{
    solve_poisson, solve_poisson_rates, steady_state, PoissonSolution, StateDistribution,
    SteadyState,
};
pub use transient::{
    expected_cumulative_reward, transient_distribution, transient_from, DEFAULT_TRANSIENT_TOL,
};
