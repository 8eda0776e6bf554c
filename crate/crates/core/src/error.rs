use thiserror::Error;

use crate::model::SystemState;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid parameters: {0}")]
    InvalidParams(String),

    #[error("invalid strategy profile: {0}")]
    InvalidProfile(String),

    #[error("physician {physician} claimed {claim} patients in state {state}, allowed 1..={max}")]
    InvalidClaim {
        physician: usize,
        claim: u32,
        max: u32,
        state: SystemState,
    },

    #[error("state space exceeds bound of {0} states")]
    StateSpaceTooLarge(usize),

    #[error("state {0} is not part of the generator")]
    UnknownState(SystemState),

    #[error("chain has {0} closed classes, expected exactly one")]
    NotUnichain(usize),

    #[error("singular linear system: {0}")]
    Singular(&'static str),

    #[error("service draws exhausted after {0} initiations")]
    DrawsExhausted(usize),

    #[error("no calibration meets the targets: {0}")]
    Infeasible(String),

    #[error("unknown sample path {0:?}")]
    UnknownPath(String),

    /// The operation does not fit the session's current status.
    #[error("{0}")]
    Conflict(String),

    #[error("{0}")]
    Invalid(String),
}

pub type Result<T> = std::result::Result<T, Error>;
