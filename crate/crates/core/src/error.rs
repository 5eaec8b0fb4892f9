use thiserror::Error;

use crate::givp::{StateVector, Trajectory};

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error, Clone)]
pub enum Error {
    /// An operation was called with arguments outside its contract.
    #[error("contract violation: {0}")]
    Contract(String),

    /// Components of a problem do not fit together.
    #[error("configuration error in {component}: {message}")]
    Config {
        component: &'static str,
        message: String,
    },

    #[error("range error: {0}")]
    Range(String),

    /// The state left the finite region or exceeded the divergence guard.
    /// `partial` holds the samples recorded up to the last good state when
    /// the failure happened inside a full integration run.
    #[error("divergence at t = {time}: {reason}")]
    Divergence {
        time: f64,
        reason: String,
        last_good: StateVector,
        partial: Option<Box<Trajectory>>,
    },

    #[error("adaptive step underflow at t = {time} (h = {step:e})")]
    StepUnderflow {
        time: f64,
        step: f64,
        last_good: StateVector,
    },

    /// The constant-direction condition could not be evaluated.
    #[error("indeterminate: {0}")]
    Indeterminate(String),
}

impl Error {
    pub(crate) fn contract(msg: impl Into<String>) -> Self {
        Error::Contract(msg.into())
    }

    pub(crate) fn config(component: &'static str, msg: impl Into<String>) -> Self {
        Error::Config {
            component,
            message: msg.into(),
        }
    }
}
