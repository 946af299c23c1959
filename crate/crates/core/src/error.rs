//! Error types shared across the crate.

use thiserror::Error;

/// Errors produced by the numeric kernels.
///
/// Validation routines report rather than fail; these variants are reserved
/// for genuinely unusable inputs or exhausted numeric budgets.
#[derive(Debug, Clone, Error)]
pub enum Error {
    /// A series or product could not reach the requested relative error
    /// within the configured number of terms.
    #[error("truncation failure in {context}: bound {bound:.3e} above target {target:.3e}")]
    Truncation {
        context: &'static str,
        bound: f64,
        target: f64,
    },

    /// A denominator argument fell within `margin` of the period lattice, so
    /// the evaluation would be dominated by a pole.
    #[error("argument within {distance:.3e} of a pole (margin {margin:.3e}) in {context}")]
    PoleHit {
        context: &'static str,
        distance: f64,
        margin: f64,
    },

    /// A sample matrix stayed ill-conditioned after all resampling retries.
    #[error("linear system ill-conditioned: cond ≈ {cond:.3e} after {retries} retries")]
    IllConditioned { cond: f64, retries: usize },

    /// A combinatorial sum would exceed the configured term cap.
    #[error("combinatorial sum of {terms} terms exceeds cap {cap}")]
    CombinatorialOverflow { terms: usize, cap: usize },

    /// A pole of the integrand lies too close to the integration torus; the
    /// straight-torus quadrature refuses rather than deforming the contour.
    #[error("pole at distance {distance:.3e} from the integration torus (required {required:.3e})")]
    PoleTooClose { distance: f64, required: f64 },

    /// The two Richardson quadrature levels disagree beyond tolerance.
    #[error("quadrature not converged: Richardson pair differs by {diff:.3e} (tol {tol:.3e})")]
    NonConvergent { diff: f64, tol: f64 },

    /// An exponent left the guarded magnitude window.
    #[error("exponent magnitude {magnitude:.3e} exceeds overflow guard in {context}")]
    Overflow { context: &'static str, magnitude: f64 },

    /// A constructor was handed values violating its documented invariants.
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
}

pub type Result<T> = std::result::Result<T, Error>;
