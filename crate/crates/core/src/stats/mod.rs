//! Gaussian distribution primitives, low-dimensional Gaussian region
//! probabilities, equicoordinate quantiles, and a monotone root solver.
//!
//! All routines are pure and stateless; they are safe to call concurrently
//! from any number of threads.

mod bivariate;
mod normal;
mod region;
mod root;

pub use bivariate::bivariate_normal_cdf;
pub use normal::{pooled_sd, std_normal_cdf, std_normal_pdf, std_normal_quantile, std_normal_sf};
pub use region::{equicoordinate_quantile, gaussian_region_prob, GaussianRegion};
pub use root::{solve_monotone_root, RootBracket};
