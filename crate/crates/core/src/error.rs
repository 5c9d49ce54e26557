//! Error type shared by all modules.

use thiserror::Error;

/// Failure modes of the numerical pipeline.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    /// Point outside the region where a formula is defined.
    #[error("domain error: {0}")]
    Domain(String),
    /// Evaluation at a coordinate pole of the sphere.
    #[error("pole error: {0}")]
    Pole(String),
    /// Invalid or inconsistent configuration.
    #[error("configuration error: {0}")]
    Config(String),
    /// NaN, overflow or another numerical breakdown.
    #[error("numerical failure: {0}")]
    Numerical(String),
    /// Step-size control gave up.
    #[error("step-size error: {0}")]
    StepSize(String),
    /// Newton iteration failed to converge.
    #[error("Newton iteration did not converge: {0}")]
    Newton(String),
    /// A Jacobian and its co-integrated inverse disagree.
    #[error("singular Jacobian: {0}")]
    SingularJacobian(String),
    /// Not enough data for a fit.
    #[error("insufficient samples: {0}")]
    InsufficientSamples(String),
    /// Query outside the computed region.
    #[error("query outside computed domain: {0}")]
    OutsideDomain(String),
    /// Malformed textual input.
    #[error("parse error: {0}")]
    Parse(String),
}

/// Result alias used throughout the crate.
pub type Result<T> = std::result::Result<T, Error>;
