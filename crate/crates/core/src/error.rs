use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    /// An argument lies outside the domain of the function.
    #[error("{what} out of domain: {value}")]
    Domain { what: &'static str, value: f64 },

    /// A construction parameter violates an invariant.
    #[error("invalid {name}: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    /// Tabulated input contains unusable values.
    #[error("bad data: {0}")]
    Data(String),

    /// A query falls outside the solved range of a trajectory.
    #[error("{what} = {value} outside [{lo}, {hi}]")]
    Range {
        what: &'static str,
        value: f64,
        lo: f64,
        hi: f64,
    },

    /// A statistic is undefined for the given state (for example on an empty network).
    #[error("undefined statistics: {0}")]
    Undefined(String),

    /// A trip does not finish within the solved horizon.
    #[error("trip not completed: {remaining} miles left at the horizon")]
    NotCompleted { remaining: f64 },

    /// Trip mass beyond the distance grid exceeds the allowed fraction.
    #[error("truncated mass {mass} exceeds {limit} (raise grid X or allow truncation)")]
    Truncation { mass: f64, limit: f64 },

    /// A run hit its step budget before reaching the horizon.
    #[error("step limit of {0} reached before the horizon")]
    StepLimit(usize),

    /// An internal consistency check failed.
    #[error("consistency check failed: {0}")]
    Consistency(String),
}

pub(crate) fn invalid(name: &'static str, reason: impl Into<String>) -> Error {
    Error::InvalidParameter {
        name,
        reason: reason.into(),
    }
}

pub(crate) fn check_non_negative(what: &'static str, value: f64) -> Result<()> {
    if value >= 0.0 {
        Ok(())
    } else {
        Err(Error::Domain { what, value })
    }
}
