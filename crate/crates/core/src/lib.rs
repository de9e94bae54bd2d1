//! Simulator and verification toolkit for the subcritical contact process
//! on `Z^d`.
//!
//! The crate is organized around an explicit graphical construction of the
//! dynamics: Poisson recovery marks and infection arrows on a bounded
//! space-time window ([`graphical`]), from which the process itself
//! ([`process`]), path constructions ([`workpath`]), cluster decompositions
//! ([`clusters`]) and Monte Carlo estimators ([`estimators`]) are all
//! derived. An exact finite-chain reference ([`oracle`]) and statistical
//! test primitives ([`stats`]) close the loop for verification.

pub mod clusters;
pub mod estimators;
pub mod graphical;
pub mod lattice;
pub mod oracle;
pub mod process;
pub mod rng;
pub mod stats;
pub mod testkit;
pub mod workpath;

use thiserror::Error;

/// Crate-wide error type.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("time ordering violated: {0}")]
    TimeOrdering(String),
    #[error("window overflow: {0}")]
    WindowOverflow(String),
    #[error("usage error: {0}")]
    Usage(String),
    #[error("insufficient data: {0}")]
    InsufficientData(String),
    #[error("numeric failure: {0}")]
    Numeric(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
