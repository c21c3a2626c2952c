//! Robust linear and polyhedral estimation for statistical linear inverse
//! problems with an uncertain observation matrix.
//!
//! Observations follow `ω = A[η]x + ξ` with `A[η] = A + Σ_α η_α A_α`, a signal
//! set given by an ellitope, and recovery error measured by a maximum of
//! Euclidean seminorms. The crate assembles and solves the semidefinite
//! programs that certify the ε-risk of linear estimates `ŵ = Hᵀω` and
//! polyhedral estimates `x̂ ∈ Argmin_{u∈X} ‖Hᵀ(Au−ω)‖_∞`, synthesizes contrast
//! matrices by minimizing those certificates, and cross-checks every bound
//! against sampling oracles and Monte Carlo simulation.
//!
//! Module map:
//! - [`geometry`] — ellitopes, spectratopes, error norms, support functions and gauges;
//! - [`conic`] — the conic-program builder and solve contract behind every bound;
//! - [`quadmax`] — semidefinite upper bound for quadratic maximization over an ellitope;
//! - [`linear`] — risk certification/synthesis of linear estimates under random
//!   matrix uncertainty, plus the repeated-observation geometric-median aggregation;
//! - [`polyhedral`] — polyhedral estimate analysis, ball-case synthesis through the
//!   compatible spectratope cone, randomized contrast extraction, recovery, and the
//!   median-of-means variant;
//! - [`robust`] — uncertain-but-bounded perturbations: scenario bounds, structured
//!   norm-bounded robust norms, linear-form bounds, and the UBB polyhedral pieces;
//! - [`stochastics`] — noise samplers, concentration utilities, Monte Carlo harness.

pub mod conic;
pub mod error;
pub mod geometry;
pub mod linear;
pub mod polyhedral;
pub mod quadmax;
pub mod robust;
pub mod stochastics;

pub use error::{Error, Result};

/// Matrix type used throughout: dense, column-major, `f64`.
pub type Mat = nalgebra::DMatrix<f64>;
/// Vector type used throughout.
pub type Vec64 = nalgebra::DVector<f64>;
