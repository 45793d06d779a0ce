use std::ops::Range;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("point {x} lies outside the interval [{lo}, {hi}]")]
    OutOfRange { x: f64, lo: f64, hi: f64 },

    /// The discriminant of the factorised spectrum is non-negative, so the
    /// roots p± are real and Green's function oscillates over the whole domain.
    #[error("real-root regime: S = {s} >= 1 (time step too large for viscosity)")]
    RealRoots { s: f64 },

    #[error("eigenvalue {index} of the linear operator vanishes")]
    DegenerateSpectrum { index: usize },

    #[error("operators need {required} bytes but the limit is {limit} bytes")]
    Resource { required: u64, limit: u64 },

    #[error("row partition error: {0}")]
    Partition(String),

    #[error("configuration mismatch: {0}")]
    Mismatch(String),

    #[error("solution blew up at step {step}")]
    BlowUp { step: u64 },

    #[error("seeding would be unstable: {0}")]
    SeedingUnstable(String),

    #[error("statistics error: {0}")]
    Statistics(String),

    #[error("format error: {0}")]
    Format(String),

    #[error("config error for key `{key}`: {msg}")]
    Config { key: String, msg: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidArgument(msg.into())
    }

    pub(crate) fn config(key: impl Into<String>, msg: impl Into<String>) -> Self {
        Error::Config {
            key: key.into(),
            msg: msg.into(),
        }
    }

    pub(crate) fn partition(rows: &Range<usize>, msg: &str) -> Self {
        Error::Partition(format!("rows {}..{}: {msg}", rows.start, rows.end))
    }
}
