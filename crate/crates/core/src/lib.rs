//! Quantitative normal approximation for integer-valued random variables,
//! driven by the location of the zeros of their probability generating
//! functions.
//!
//! The crate is organised bottom-up:
//!
//! * [`dist`] exact arithmetic on finitely supported laws (moments,
//!   cumulants, convolution, Kolmogorov distance to the standard normal);
//! * [`pgf`] generating polynomials, their roots and the logarithmic
//!   potential `u(z) = log|f(z)|`;
//! * [`series`] and [`cumulants`] truncated power series, cumulants from
//!   roots, and the dominant-term / taming algorithms on cumulant sequences;
//! * [`harmonic`] and [`planar`] grid checks of positivity and monotonicity
//!   properties of `u`, Poisson densities and Harnack-type bounds;
//! * [`brownian`] walk-on-spheres estimates of Brownian exit probabilities;
//! * [`clt`] characteristic functions, the cumulant remainder series, Esseen
//!   inversion and consolidated bound reports;
//! * [`constructions`] extremal families showing the bounds are attained;
//! * [`multivariate`] sparse multivariate generating functions, stable
//!   products and one-dimensional projections.

pub mod brownian;
pub mod clt;
pub mod constructions;
pub mod cumulants;
pub mod decimal;
pub mod dist;
pub mod harmonic;
pub mod multivariate;
pub mod numeric;
pub mod pgf;
pub mod planar;
pub mod series;

pub use num_complex::Complex64;

pub use brownian::{ExitEstimate, RectangleSpec, WosConfig};
pub use clt::{BoundReport, GrowthSpec, RemainderSeries};
pub use constructions::ConstructionResult;
pub use cumulants::CumulantSeq;
pub use dist::{DiscretePmf, MomentSummary};
pub use harmonic::{GridSpec, Region, SectorSpec};
pub use multivariate::{CovStats, DirectionVector, MultiPgf, StableProduct};
pub use pgf::{FactoredPgf, PgfPoly, RootGeometry, RootSet};
pub use series::TruncatedSeries;

/// Coarse classification used by front ends to pick an exit status.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorClass {
    /// The caller supplied input that violates a documented precondition.
    Precondition,
    /// A numerical routine failed to reach its tolerance.
    Internal,
}
