use thiserror::Error;

use crate::ringcore::RingError;
use crate::series::SeriesError;

/// Errors raised above the ring and series layers.
#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum Error {
    #[error(transparent)]
    Ring(#[from] RingError),
    #[error(transparent)]
    Series(#[from] SeriesError),
    #[error("coefficient of {term} is not {p}-integral (implementation bug)")]
    NotPIntegral { term: String, p: u64 },
    #[error("unsupported ring: {0}")]
    UnsupportedRing(String),
    #[error("formal group law axiom failed: {0}")]
    AxiomFailure(String),
    #[error("zero weight: the circle must fix only the zero section")]
    ZeroWeight,
    #[error("truncation too small: need at least {needed}, got {got}")]
    TruncationTooSmall { needed: usize, got: usize },
    #[error("unit certificate failed: {0}")]
    UnitCertificate(String),
    #[error("recursion did not converge; minimal sufficient truncations u^{t_u}, w^{t_w}")]
    NonConvergent { t_u: usize, t_w: usize },
    #[error("invalid input: {0}")]
    Invalid(String),
}

pub type Result<T> = std::result::Result<T, Error>;
