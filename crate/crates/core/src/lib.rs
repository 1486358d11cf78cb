//! Selectivity model for grid-based locality-sensitive hashing.
//!
//! A query hypercube of side `s` is centred on the query point, and each of
//! `m` independently offset grids with cell side `b` contributes the one cell
//! that contains the query. The crate computes the expected fraction of the
//! query covered by at least `ell` of those cells, `p(m, ell, d)`, four ways:
//!
//! - [`analytic`]: exact rational closed forms (inclusion–exclusion over
//!   overlap terms, order-statistic quadrant sums),
//! - [`oracle`]: tensor midpoint and Monte Carlo integration of the raw
//!   integrands,
//! - [`simulate`]: Monte Carlo over random cell sets with exact per-sample
//!   coverage volumes from [`geometry`],
//! - [`index`]: measured recall of a real multi-grid hash index on a torus.
//!
//! Math modules are generic over the scalar type. The aliases below fix the
//! common instantiations.

pub mod analytic;
pub mod error;
pub mod geometry;
pub mod index;
pub mod oracle;
pub mod rational;
pub mod report;
pub mod rng;
pub mod scalar;
pub mod simulate;
pub mod spec;

pub use error::{Error, Result};
pub use scalar::{Field, Real};
pub use spec::CoverageSpec;

/// Exact arbitrary-precision fraction; carries every analytic result.
pub type Rational = num_rational::BigRational;

pub type CellSet64 = geometry::CellSet<f64>;
pub type CellSet32 = geometry::CellSet<f32>;
pub type ClippedIntervalSet64 = geometry::ClippedIntervalSet<f64>;
pub type BoxDomain64 = oracle::BoxDomain<f64>;
pub type OracleResult64 = oracle::OracleResult<f64>;
