//! Weighted (multiplier) bootstrap for Euclidean-norm statistics.
//!
//! The crate covers the full pipeline of the coverage and CDF experiments:
//!
//! - [`distributions`]: scalar laws with exact raw moments and seeded samplers;
//! - [`weights`]: multiplier laws with `E eps = 0`, `E eps^2 = 1`, `E eps^3 = 1`;
//! - [`bootstrap`]: scaled sums, bootstrap replicates and the empirical upper quantile;
//! - [`moment_match`]: Gaussian-plus-residual decompositions of moment sequences,
//!   Hankel solvability, atomic representing measures and Pareto residual fits;
//! - [`regression`]: least squares and the wild bootstrap for the normalized loss;
//! - [`analysis`]: empirical CDFs, Kolmogorov-Smirnov distances, the chi-squared CDF;
//! - [`harness`]: Monte Carlo experiments, config files and CSV/JSON output.

pub mod analysis;
pub mod bootstrap;
pub mod distributions;
pub mod error;
pub mod harness;
pub mod moment_match;
pub mod regression;
pub mod rng;
mod text;
pub mod weights;

pub use distributions::{DistributionSpec, MomentVector};
pub use error::{Error, Result};
pub use rng::RngStream;
pub use weights::WeightScheme;
