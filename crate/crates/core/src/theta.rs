//! The odd Jacobi theta function and the Gaussian factor α.
//!
//! Throughout the crate θ denotes the odd entire function
//!
//! ```text
//! θ(t) = −Σ_{j∈ℤ} exp(πi(j+1/2)²τ + 2πi(j+1/2)(t+1/2)),
//! ```
//!
//! with multipliers −1 and −exp(−2πit−πiτ) under t → t+1 and t → t+τ. Its
//! zeros are simple and lie on the lattice ℤ+τℤ. The equivalent product form
//!
//! ```text
//! θ(t) = 2 e^{πiτ/4} sin(πt) Π_{j≥1} (1−q^j)(1−q^j e^{2πit})(1−q^j e^{−2πit}),
//! ```
//!
//! with q = e^{2πiτ}, serves as an independent cross-check of the series.
//!
//! Arguments far from the fundamental domain are never summed directly: the
//! quasi-periodicity multipliers are applied analytically after reducing the
//! argument, which keeps every exponent inside the overflow guard.

use num_complex::Complex64 as C64;

use crate::error::{Error, Result};
use crate::{pi_i, two_pi_i};

/// Largest allowed magnitude for the real part of an exponent before the
/// evaluation is refused instead of overflowing.
pub const EXP_GUARD: f64 = 500.0;

/// An elliptic modulus τ in the upper half-plane, with |q| = |e^{2πiτ}| cached.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EllipticModulus {
    tau: C64,
    q_abs: f64,
}

impl EllipticModulus {
    pub fn new(tau: C64) -> Result<Self> {
        if !(tau.im > 0.0) {
            return Err(Error::InvalidParameter(format!(
                "modulus must have positive imaginary part, got {tau}"
            )));
        }
        let q_abs = (-2.0 * std::f64::consts::PI * tau.im).exp();
        Ok(EllipticModulus { tau, q_abs })
    }

    pub fn tau(&self) -> C64 {
        self.tau
    }

    /// The nome q = e^{2πiτ}.
    pub fn nome(&self) -> C64 {
        (two_pi_i() * self.tau).exp()
    }

    /// |q| ∈ (0,1).
    pub fn q_abs(&self) -> f64 {
        self.q_abs
    }
}

/// Truncation control for theta series and products.
#[derive(Debug, Clone, Copy)]
pub struct TruncationPolicy {
    pub target_rel_err: f64,
    pub max_terms: usize,
}

impl TruncationPolicy {
    pub fn new(target_rel_err: f64, max_terms: usize) -> Result<Self> {
        if !(target_rel_err > 0.0 && target_rel_err < 1.0) {
            return Err(Error::InvalidParameter(format!(
                "target_rel_err must lie in (0,1), got {target_rel_err}"
            )));
        }
        if max_terms < 8 {
            return Err(Error::InvalidParameter(format!(
                "max_terms must be at least 8, got {max_terms}"
            )));
        }
        Ok(TruncationPolicy {
            target_rel_err,
            max_terms,
        })
    }
}

impl Default for TruncationPolicy {
    fn default() -> Self {
        TruncationPolicy {
            target_rel_err: 1e-14,
            max_terms: 64,
        }
    }
}

/// Reduce t to t₀ + kτ + l with |Im t₀| ≤ Im τ/2 and |Re t₀| ≤ 1/2, returning
/// (t₀, k, l).
fn reduce_argument(t: C64, tau: C64) -> (C64, f64, f64) {
    let k = (t.im / tau.im).round();
    let t1 = t - k * tau;
    let l = t1.re.round();
    (t1 - l, k, l)
}

/// Quasi-periodicity multiplier relating θ(t₀+kτ+l) to θ(t₀):
/// θ(t₀+kτ+l) = (−1)^{k+l} exp(−2πik t₀ − πik²τ) θ(t₀).
fn shift_multiplier(t0: C64, k: f64, l: f64, tau: C64, context: &'static str) -> Result<C64> {
    let exponent = -two_pi_i() * k * t0 - pi_i() * k * k * tau;
    if exponent.re.abs() > EXP_GUARD {
        return Err(Error::Overflow {
            context,
            magnitude: exponent.re.abs(),
        });
    }
    let sign = if ((k + l) as i64).rem_euclid(2) == 0 {
        1.0
    } else {
        -1.0
    };
    Ok(sign * exponent.exp())
}

/// θ(t) via the symmetric series, truncated once the tail bound
/// |q|^{(J+1/2)²} e^{2π(J+1/2)|Im t|} drops below the target relative error.
pub fn theta(t: C64, modulus: &EllipticModulus, pol: &TruncationPolicy) -> Result<C64> {
    let tau = modulus.tau;
    let (t0, k, l) = reduce_argument(t, tau);
    let mult = shift_multiplier(t0, k, l, tau, "theta")?;

    let mut sum = C64::new(0.0, 0.0);
    let mut scale = 0.0_f64;
    let im_abs = t0.im.abs();
    let log_q_abs = -2.0 * std::f64::consts::PI * tau.im;
    for j in 0..pol.max_terms {
        let a = j as f64 + 0.5;
        let quad = pi_i() * a * a * tau;
        let plus = (quad + two_pi_i() * a * (t0 + 0.5)).exp();
        let minus = (quad - two_pi_i() * a * (t0 + 0.5)).exp();
        sum -= plus + minus;
        scale = scale.max(plus.norm()).max(minus.norm());

        let b = a + 1.0;
        let tail = (0.5 * log_q_abs * b * b + 2.0 * std::f64::consts::PI * b * im_abs).exp();
        if tail < pol.target_rel_err * scale.max(sum.norm()).max(f64::MIN_POSITIVE) {
            return Ok(mult * sum);
        }
    }
    Err(Error::Truncation {
        context: "theta series",
        bound: f64::NAN,
        target: pol.target_rel_err,
    })
}

/// θ(t) via the triple product, truncated when the remaining factors deviate
/// from 1 by less than the target relative error.
pub fn theta_product(t: C64, modulus: &EllipticModulus, pol: &TruncationPolicy) -> Result<C64> {
    let tau = modulus.tau;
    let (t0, k, l) = reduce_argument(t, tau);
    let mult = shift_multiplier(t0, k, l, tau, "theta_product")?;

    let q = modulus.nome();
    let e_plus = (two_pi_i() * t0).exp();
    let e_minus = (-two_pi_i() * t0).exp();
    let mut prod = 2.0 * (pi_i() * tau / 4.0).exp() * (std::f64::consts::PI * t0).sin();
    let mut qj = C64::new(1.0, 0.0);
    let deviation_scale = 1.0 + e_plus.norm().max(e_minus.norm());
    for _ in 0..pol.max_terms {
        qj *= q;
        prod *= (1.0 - qj) * (1.0 - qj * e_plus) * (1.0 - qj * e_minus);
        if qj.norm() * deviation_scale < pol.target_rel_err {
            return Ok(mult * prod);
        }
    }
    Err(Error::Truncation {
        context: "theta product",
        bound: f64::NAN,
        target: pol.target_rel_err,
    })
}

/// The Gaussian factor α(λ) = exp(−πiλ²/4η).
///
/// Requires η ≠ 0.
pub fn alpha(lambda: C64, eta: C64) -> C64 {
    debug_assert!(eta.norm() > 0.0, "alpha requires eta != 0");
    (-pi_i() * lambda * lambda / (4.0 * eta)).exp()
}

/// The exact exponent of α(λ₁)/α(λ₂), i.e. −πi(λ₁²−λ₂²)/4η.
///
/// Carrying this exponent instead of the evaluated ratio gives a single-valued
/// convention for fractional powers of α-ratios: (α(λ₁)/α(λ₂))^w is defined as
/// exp(w · alpha_ratio_exponent). Powers defined this way are exactly additive
/// in w, so identities built from them hold without branch ambiguity.
pub fn alpha_ratio_exponent(lambda1: C64, lambda2: C64, eta: C64) -> C64 {
    -pi_i() * (lambda1 * lambda1 - lambda2 * lambda2) / (4.0 * eta)
}

/// Distance from x to the lattice ℤ + τℤ, measured in ℂ.
pub fn lattice_distance(x: C64, tau: C64) -> f64 {
    let v = x.im / tau.im;
    let u = x.re - v * tau.re;
    let du = u - u.round();
    let dv = v - v.round();
    (du + dv * tau).norm()
}
