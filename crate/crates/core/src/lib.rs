//! Numerics for the elliptic quantum group E_{τ,η}(sl₂): dynamical R-matrices,
//! qKZB difference operators, elliptic hypergeometric integral solutions, and
//! the monodromy transformations connecting them.
//!
//! The crate is organized around a small set of building blocks:
//!
//! - [`theta`] — the odd Jacobi theta function θ(t, τ), its product form, and
//!   the Gaussian factor α(λ) = exp(−πiλ²/4η), with truncation control.
//! - [`space`] — compositions, the zero-weight space V[0] of a tensor product
//!   of highest-weight modules, and the global parameter set.
//! - [`weight`] — the weight-function bases ω_M of the functional spaces F^m,
//!   the twisted symmetric-group action, and the tensor map Φ.
//! - [`rmatrix`] — R-matrices extracted as transition matrices between two
//!   weight-function bases, closed forms for low levels, and axiom checks.
//! - [`qkzb`] — the difference operators K_j acting on λ-functions with values
//!   in V[0], together with the diagonal multipliers B_k, D_j.
//! - [`phase`] — double-product phase functions Ω_a / Φ_a, the pole catalog of
//!   the master integrand, and the parameter-condition validator.
//! - [`hyper`] — hypergeometric integrals over the torus [0,N]^m by periodic
//!   trapezoidal quadrature, the solution tensor u, and solution checks.
//! - [`monodromy`] — transport of solutions under z-permutations and shifts of
//!   z_j by τ or 1, and the dual R̃-matrix with modulus p.
//!
//! All computations are desk-scale double precision: domains are guarded so
//! that exponents stay within a safe range, and every identity is verified at
//! generic sample points with explicit residual tolerances.

pub mod error;
pub mod hyper;
pub mod linalg;
pub mod monodromy;
pub mod phase;
pub mod presets;
pub mod qkzb;
pub mod rmatrix;
pub mod sample;
pub mod space;
pub mod theta;
pub mod weight;

pub use error::{Error, Result};
pub use num_complex::Complex64 as C64;

/// 2πi, the ubiquitous exponent scale.
pub(crate) fn two_pi_i() -> C64 {
    C64::new(0.0, 2.0 * std::f64::consts::PI)
}

/// πi.
pub(crate) fn pi_i() -> C64 {
    C64::new(0.0, std::f64::consts::PI)
}
