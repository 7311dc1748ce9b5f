//! Exact simulation of switch-free linear-optical quantum computing architectures.

pub mod components;
pub mod dna;
pub mod error;
pub mod fock;
pub mod herald;
pub mod logical;
pub mod multirail;
pub mod optics;
pub mod report;
pub mod scenarios;

pub use error::{Result, SimError};
pub use fock::{FockPattern, Mode, ModeRegister, PureState};
