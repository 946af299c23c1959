//! Curated parameter regimes used by the verification suites and the CLI
//! defaults.
//!
//! Two regimes matter for the integral-backed checks:
//!
//! - The *starting range* regime keeps every pole of the master integrand at
//!   least Im a_k away from the real integration torus, with
//!   Im a_k / max(Im τ, Im p) > 10. Because Σa_k = 2ηm forces Im η =
//!   Σ Im a_k / 2m, this regime has Im η > 0; for m = 1 the t_i−t_j pole
//!   families (the only ones constrained by the sign of Im η) are absent, so
//!   the sign is immaterial and the validator records the `im.eta` condition
//!   as informative only.
//! - The *theta-level* regime pins p = −4ηN with natural weights, which
//!   requires Im η < 0; the poles then sit |Im η| away from the torus and the
//!   theta-function properties of the solutions become exact integrand
//!   identities there.

use num_complex::Complex64 as C64;

use crate::space::{ModelParams, NumericOptions};
use crate::theta::TruncationPolicy;

/// Generic parameters for operator-level checks (no integrals): comfortable
/// moduli, generic complex weights with Λ₁+Λ₂ = 2, m = 1.
pub fn generic_n2() -> ModelParams {
    ModelParams::new(
        C64::new(0.11, 0.83),
        C64::new(-0.07, 0.64),
        C64::new(0.17, -0.09),
        vec![C64::new(1.0, 0.4), C64::new(1.0, -0.4)],
        1,
        TruncationPolicy::default(),
        NumericOptions::default(),
    )
    .expect("generic_n2 parameters are valid")
}

/// Three-factor variant for flatness checks: ΣΛ = 4, m = 2.
pub fn generic_n3() -> ModelParams {
    ModelParams::new(
        C64::new(0.11, 0.83),
        C64::new(-0.07, 0.64),
        C64::new(0.17, -0.09),
        vec![C64::new(1.0, 0.3), C64::new(1.0, -0.5), C64::new(2.0, 0.2)],
        2,
        TruncationPolicy::default(),
        NumericOptions::default(),
    )
    .expect("generic_n3 parameters are valid")
}

/// Starting-range regime for the hypergeometric solutions (m = 1, n = 2,
/// ξ ≡ 1): Im a_k ≈ 0.052 against moduli ≈ 0.005, ratio > 10.
///
/// The moduli are kept as small as the cost budget allows: every modulus-p
/// object in the monodromy identities carries magnitudes of order
/// e^{π(2 Im a)²/Im p} = e^{4π r² Im p} at fixed ratio r, so the identities
/// are verifiable in double precision only when Im p is small enough — here the
/// dynamic range is ~e^{17}, leaving ten digits of headroom.
pub fn starting_range_n2() -> ModelParams {
    ModelParams::new(
        C64::new(0.0312, 0.0051),
        C64::new(-0.0217, 0.0050),
        C64::new(0.004, 0.0525),
        vec![C64::new(1.0, 0.1), C64::new(1.0, -0.1)],
        1,
        TruncationPolicy::default(),
        NumericOptions::default(),
    )
    .expect("starting_range_n2 parameters are valid")
}

/// Evaluation points used with [`starting_range_n2`].
pub fn starting_range_z() -> Vec<C64> {
    vec![C64::new(0.1314, 0.0), C64::new(-0.2123, 0.0)]
}

/// Theta-level regime: p = −4ηN with N = 1, natural weights Λ = (1,1), m = 1.
pub fn theta_level_n2() -> ModelParams {
    let eta = C64::new(0.043, -0.21);
    ModelParams::new(
        C64::new(0.0351, 0.46),
        -4.0 * eta,
        eta,
        vec![C64::new(1.0, 0.0), C64::new(1.0, 0.0)],
        1,
        TruncationPolicy::default(),
        NumericOptions::default(),
    )
    .expect("theta_level_n2 parameters are valid")
}

/// Generic λ samples for identity checks.
pub fn lambda_samples() -> Vec<C64> {
    vec![
        C64::new(0.2731, 0.0141),
        C64::new(-0.1729, 0.0287),
        C64::new(0.3605, -0.0112),
        C64::new(0.0513, 0.0242),
    ]
}

/// Generic μ samples, distinct from the λ samples.
pub fn mu_samples() -> Vec<C64> {
    vec![
        C64::new(-0.1321, 0.0212),
        C64::new(0.2217, -0.0193),
        C64::new(0.0731, 0.0332),
        C64::new(-0.2519, 0.0117),
    ]
}
