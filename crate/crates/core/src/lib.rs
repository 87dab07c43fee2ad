//! Analysis and design toolkit for three-arm "gold-standard" non-inferiority
//! trials with an experimental treatment (E), an active reference (R) and a
//! placebo (P).
//!
//! The crate provides:
//!
//! - [`stats`]: Gaussian primitives (univariate and bivariate normal CDFs,
//!   quantiles, low-dimensional Gaussian region probabilities, equicoordinate
//!   quantiles) and a monotone root solver.
//! - [`sci`]: unadjusted lower confidence bounds, the intersection-union and
//!   superiority filters, three families of simultaneous lower confidence
//!   bounds (stepwise/IU, informative, single-step), the hierarchical
//!   baseline procedure without intervals, and success adjudication.
//! - [`design`]: success probabilities under assumed true effects, required
//!   sample sizes at fixed allocation ratios, allocation optimization, and
//!   mixture-weighted ("assurance") success probabilities.
//! - [`simulate`]: a seeded, partition-independent Monte Carlo engine for
//!   operating characteristics (filter rates, success probabilities, median
//!   lower bounds).

pub mod design;
pub mod error;
pub mod sci;
pub mod simulate;
pub mod stats;

pub use error::{Error, Result};
