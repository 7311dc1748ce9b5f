use thiserror::Error;

use crate::fock::Mode;

pub type Result<T> = std::result::Result<T, SimError>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SimError {
    #[error("mode {0} is not in the register")]
    UnknownMode(Mode),

    #[error("register mismatch: {0}")]
    RegisterMismatch(String),

    #[error("coupler matrix is not unitary (deviation {0:.3e})")]
    InvalidCoupler(f64),

    #[error("matrix is not unitary (deviation {0:.3e})")]
    NonUnitary(f64),

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("{0} out of range")]
    OutOfRange(String),

    #[error("delay pushes a photon in spatial mode {spatial} to timebin {timebin}, past the window of {window}")]
    DelayOverflow {
        spatial: u32,
        timebin: u32,
        window: u32,
    },

    #[error("photon totals differ: {input} in, {output} out")]
    PhotonTotalMismatch { input: usize, output: usize },

    #[error("capacity exceeded: {0}")]
    CapacityExceeded(String),

    #[error("invalid qubit: {0}")]
    InvalidQubit(String),

    #[error("contract violation: {0}")]
    Contract(String),

    #[error("infeasible scenario: {0}")]
    Scenario(String),

    #[error("parse error: {0}")]
    Parse(String),
}
