//! Crate-wide error type.

use thiserror::Error;

/// Errors raised by the analysis, design and simulation layers.
#[derive(Debug, Error)]
pub enum Error {
    /// Invalid user input (domain violations, missing fields, bad shapes).
    #[error("invalid input: {0}")]
    Validation(String),

    /// A bracketed root solve was requested on an interval without a sign
    /// change.
    #[error("no sign change on [{lo}, {hi}]: f(lo) = {f_lo:e}, f(hi) = {f_hi:e}")]
    NoSignChange { lo: f64, hi: f64, f_lo: f64, f_hi: f64 },

    /// The root solver exhausted its iteration budget.
    #[error("root solver did not converge within {max_iter} iterations")]
    NoConvergence { max_iter: usize },

    /// An operation was requested in a mode it does not support.
    #[error("unsupported mode: {0}")]
    UnsupportedMode(String),

    /// A sample-size search hit its cap without reaching the target.
    #[error("target success probability {target} not reachable with n_E <= {cap}")]
    TargetUnreachable { target: f64, cap: usize },

    /// A numerical routine failed in a way that is not a plain domain error.
    #[error("numerical failure: {0}")]
    Numerical(String),
}

pub type Result<T> = std::result::Result<T, Error>;
