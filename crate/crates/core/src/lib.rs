//! Queueing laboratory for shared-pool self-assignment.
//!
//! Physicians claim patients from a common pool of unassigned cases in a
//! finite set of treatment rooms. This crate provides the exact Markov
//! analysis of that system under stationary claim rules ([`ctmc`]), an
//! event-driven simulator with pathwise coupling ([`des`]), incentive
//! calibration for the four payoff treatments ([`calibration`]), and the
//! shift state machine behind the interactive session API ([`session`]).

pub mod calibration;
pub mod ctmc;
pub mod des;
pub mod error;
pub mod model;
pub mod session;

pub use error::{Error, Result};
pub use model::{
    admit_count, apply_assignment_cascade, DecisionRule, RewardSpec, Strategy, StrategyProfile,
    SystemParams, SystemState,
};
