//! Phase functions, the pole catalog of the master integrand, and the
//! parameter-condition validator.
//!
//! With r = e^{2πip}, q = e^{2πiτ} (both |·| < 1), the convergent double
//! product
//!
//! ```text
//! Ω_a(t) = Π_{j,k≥0} (1−r^j q^k e^{2πi(t−a)})(1−r^{j+1}q^{k+1}e^{−2πi(t+a)})
//!        / (1−r^j q^k e^{2πi(t+a)})(1−r^{j+1}q^{k+1}e^{−2πi(t−a)})
//! ```
//!
//! defines the one-variable phase function Φ_a(t) = e^{−2πiat/p} Ω_a(t) with
//! Φ_a(t+p) = θ(t+a)/θ(t−a) · Φ_a(t). The m-variable phase function is
//!
//! ```text
//! Ω(t,z) = Π_{j≤m, l≤n} Ω_{a_l}(t_j−z_l) · Π_{i<j} Ω_{−2η}(t_i−t_j),
//! ```
//!
//! and its poles, together with those of the two weight functions, are first
//! order on the hyperplane families t_i−z_k = ∓a_k ∓ (rp+sτ) + l and
//! t_i−t_j = ±2η ∓ (rp+sτ) + l with r,s ≥ 0. The validator reports the
//! genericity and regime conditions as pass/fail with margins; callers decide
//! what to enforce.

use num_complex::Complex64 as C64;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::space::ModelParams;
use crate::two_pi_i;

/// Truncation orders for the double product.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct PhaseTruncation {
    pub max_j: usize,
    pub max_k: usize,
    pub target_rel_err: f64,
    /// Margin on |1 − factor| in a denominator below which the evaluation
    /// counts as a pole hit.
    pub pole_margin: f64,
}

impl Default for PhaseTruncation {
    fn default() -> Self {
        PhaseTruncation {
            max_j: 96,
            max_k: 96,
            target_rel_err: 1e-12,
            pole_margin: 1e-6,
        }
    }
}

impl PhaseTruncation {
    /// Orders chosen from the geometric tail bound
    /// |r|^j |q|^k e^{2π|Im(t∓a)|} / (1−|q|)(1−|r|) < target.
    pub fn auto(p: C64, tau: C64, im_bound: f64, target: f64) -> Self {
        let log_r = -2.0 * std::f64::consts::PI * p.im;
        let log_q = -2.0 * std::f64::consts::PI * tau.im;
        let geo = -(1.0 - log_q.exp()).ln() - (1.0 - log_r.exp()).ln();
        let excess = 2.0 * std::f64::consts::PI * im_bound - target.ln() + geo.max(0.0);
        let max_j = ((excess / -log_r).ceil() as usize + 8).max(8);
        let max_k = ((excess / -log_q).ceil() as usize + 8).max(8);
        PhaseTruncation {
            max_j,
            max_k,
            target_rel_err: target,
            pole_margin: 1e-6,
        }
    }
}

/// Analytic log of the tail Π(1−r^j q^k x) over the region
/// {j ≥ j0, k ≥ 0} ∪ {j < j0, k ≥ k0}, by power sums:
///
/// ```text
/// Σ log(1−r^j q^k x) = −Σ_{m≥1} (x^m/m) [ r^{j0 m}/(1−r^m)
///                       + q^{k0 m}(1−r^{j0 m})/(1−r^m) ] / (1−q^m),
/// ```
///
/// valid when |x r^{j0}| < 1 and |x q^{k0}| < 1.
fn log_product_tail(
    x: C64,
    r: C64,
    q: C64,
    j0: u32,
    k0: u32,
    tol: f64,
    max_m: usize,
) -> Result<C64> {
    let rj0 = r.powu(j0);
    let qk0 = q.powu(k0);
    let decay = (x * rj0).norm().max((x * qk0).norm());
    if decay >= 0.75 {
        return Err(Error::Truncation {
            context: "phase product tail",
            bound: decay,
            target: 0.75,
        });
    }
    let mut total = C64::new(0.0, 0.0);
    let (mut xm, mut rm, mut qm, mut rj0m, mut qk0m) =
        (C64::new(1.0, 0.0), C64::new(1.0, 0.0), C64::new(1.0, 0.0), C64::new(1.0, 0.0), C64::new(1.0, 0.0));
    for m in 1..=max_m {
        xm *= x;
        rm *= r;
        qm *= q;
        rj0m *= rj0;
        qk0m *= qk0;
        let geo_j = rj0m / (1.0 - rm);
        let geo_jk = qk0m * (1.0 - rj0m) / (1.0 - rm);
        let term = xm / (m as f64) * (geo_j + geo_jk) / (1.0 - qm);
        total -= term;
        // remaining terms decay at least geometrically with ratio `decay`
        if term.norm() * decay / (1.0 - decay) < tol {
            return Ok(total);
        }
    }
    Err(Error::Truncation {
        context: "phase product tail",
        bound: f64::NAN,
        target: tol,
    })
}

/// Ω_a(t,τ,p), the double-product part of the phase function.
///
/// Factors that deviate from 1 by more than δ ≈ 2e−2 are multiplied directly
/// over a rectangle of indices; both geometric tails are folded in through
/// the analytic power-sum logarithm, which keeps the cost at O(rect) instead
/// of O(target-resolution²) when the moduli are close to the unit circle.
pub fn omega_phase_one(t: C64, a: C64, tau: C64, p: C64, trunc: &PhaseTruncation) -> Result<C64> {
    if !(tau.im > 0.0 && p.im > 0.0) {
        return Err(Error::InvalidParameter(
            "phase function needs Im τ > 0 and Im p > 0".into(),
        ));
    }
    let r = (two_pi_i() * p).exp();
    let q = (two_pi_i() * tau).exp();
    let e_num = (two_pi_i() * (t - a)).exp(); // e^{2πi(t−a)}
    let e_den = (two_pi_i() * (t + a)).exp(); // e^{2πi(t+a)}
    let rq = r * q;
    // the four factor families as (1 − r^j q^k x), j,k ≥ 0
    let x_num1 = e_num;
    let x_num2 = rq * e_den.finv();
    let x_den1 = e_den;
    let x_den2 = rq * e_num.finv();

    let mag = x_num1
        .norm()
        .max(x_num2.norm())
        .max(x_den1.norm())
        .max(x_den2.norm());
    let r_abs = r.norm();
    let q_abs = q.norm();
    const DELTA: f64 = 2e-2;
    let rect = |log_abs: f64| -> u32 {
        if mag * DELTA.recip() <= 1.0 {
            0
        } else {
            ((mag / DELTA).ln() / -log_abs).ceil() as u32 + 1
        }
    };
    let j_rect = rect(r_abs.ln()).min(trunc.max_j as u32);
    let k_rect = rect(q_abs.ln()).min(trunc.max_k as u32);

    let mut prod = C64::new(1.0, 0.0);
    let mut rj = C64::new(1.0, 0.0);
    for _j in 0..j_rect {
        let mut rqk = rj;
        for _k in 0..k_rect {
            let n1 = 1.0 - rqk * x_num1;
            let n2 = 1.0 - rqk * x_num2;
            let d1 = 1.0 - rqk * x_den1;
            let d2 = 1.0 - rqk * x_den2;
            for d in [d1, d2] {
                if d.norm() < trunc.pole_margin {
                    return Err(Error::PoleHit {
                        context: "omega_phase_one",
                        distance: d.norm() / (2.0 * std::f64::consts::PI),
                        margin: trunc.pole_margin,
                    });
                }
            }
            prod *= n1 * n2 / (d1 * d2);
            rqk *= q;
        }
        rj *= r;
    }

    // both tails of every family, folded in analytically
    let tol = trunc.target_rel_err * 0.1;
    let max_m = 4 * trunc.max_j.max(trunc.max_k).max(16);
    let log_tail = log_product_tail(x_num1, r, q, j_rect, k_rect, tol, max_m)?
        + log_product_tail(x_num2, r, q, j_rect, k_rect, tol, max_m)?
        - log_product_tail(x_den1, r, q, j_rect, k_rect, tol, max_m)?
        - log_product_tail(x_den2, r, q, j_rect, k_rect, tol, max_m)?;
    if log_tail.re.abs() > crate::theta::EXP_GUARD {
        return Err(Error::Overflow {
            context: "omega_phase_one tail",
            magnitude: log_tail.re.abs(),
        });
    }
    Ok(prod * log_tail.exp())
}

/// Φ_a(t) = e^{−2πiat/p} Ω_a(t), the one-variable phase function.
pub fn phi_phase_one(t: C64, a: C64, tau: C64, p: C64, trunc: &PhaseTruncation) -> Result<C64> {
    Ok((-two_pi_i() * a * t / p).exp() * omega_phase_one(t, a, tau, p, trunc)?)
}

/// The m-variable phase function Ω(t,z) built from Ω factors.
pub fn omega_phase_multi(
    t: &[C64],
    z: &[C64],
    a: &[C64],
    eta: C64,
    tau: C64,
    p: C64,
    trunc: &PhaseTruncation,
) -> Result<C64> {
    assert_eq!(z.len(), a.len());
    let mut prod = C64::new(1.0, 0.0);
    for &tj in t {
        for (l, &zl) in z.iter().enumerate() {
            prod *= omega_phase_one(tj - zl, a[l], tau, p, trunc)?;
        }
    }
    for i in 0..t.len() {
        for j in i + 1..t.len() {
            prod *= omega_phase_one(t[i] - t[j], -2.0 * eta, tau, p, trunc)?;
        }
    }
    Ok(prod)
}

/// The m-variable phase function Φ(t,z) built from Φ factors.
pub fn phi_phase_multi(
    t: &[C64],
    z: &[C64],
    a: &[C64],
    eta: C64,
    tau: C64,
    p: C64,
    trunc: &PhaseTruncation,
) -> Result<C64> {
    assert_eq!(z.len(), a.len());
    let mut prod = C64::new(1.0, 0.0);
    for &tj in t {
        for (l, &zl) in z.iter().enumerate() {
            prod *= phi_phase_one(tj - zl, a[l], tau, p, trunc)?;
        }
    }
    for i in 0..t.len() {
        for j in i + 1..t.len() {
            prod *= phi_phase_one(t[i] - t[j], -2.0 * eta, tau, p, trunc)?;
        }
    }
    Ok(prod)
}

/// Which family a pole hyperplane belongs to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum PoleKind {
    /// t_i − z_k = offset
    TMinusZ { i: usize, k: usize },
    /// t_i − t_j = offset
    TMinusT { i: usize, j: usize },
}

/// A first-order pole hyperplane of the master integrand.
#[derive(Debug, Clone, Serialize)]
pub struct PoleHyperplane {
    pub kind: PoleKind,
    /// Sign of the base offset: +1 for +a_k (resp. −2η), −1 for −a_k (+2η).
    pub sign: i8,
    pub r: usize,
    pub s: usize,
    pub l: i64,
    /// The full constant: t_i − z_k = offset (resp. t_i − t_j = offset).
    pub offset: [f64; 2],
    /// Always 1.
    pub order: usize,
}

/// Rectangular search box for the catalog, applied per coordinate.
#[derive(Debug, Clone, Copy)]
pub struct CatalogBox {
    pub re: (f64, f64),
    pub im: (f64, f64),
}

/// Integer caps on the lattice indices r, s of the catalog.
#[derive(Debug, Clone, Copy)]
pub struct CatalogCaps {
    pub r_max: usize,
    pub s_max: usize,
}

impl Default for CatalogCaps {
    fn default() -> Self {
        CatalogCaps {
            r_max: 64,
            s_max: 64,
        }
    }
}

fn c64(offset: C64) -> [f64; 2] {
    [offset.re, offset.im]
}

/// All pole hyperplanes of the integrand
/// Ω(t,z)·ω_L(t,λ,z;τ)·ω_M(t,μ,z;p) that intersect the box:
///
/// ```text
/// t_i − z_k = −a_k − rp − sτ + l      t_i − z_k = a_k + rp + sτ + l
/// t_i − t_j = 2η − rp − sτ + l        t_i − t_j = −2η + rp + sτ + l
/// ```
///
/// with i ≤ m, k ≤ n, r,s ≥ 0, l ∈ ℤ.
pub fn pole_catalog(
    params: &ModelParams,
    z: &[C64],
    bbox: &CatalogBox,
    caps: &CatalogCaps,
) -> Vec<PoleHyperplane> {
    let mut out = Vec::new();
    let a = params.a_vec();
    let m = params.m;
    let n = params.n();
    let in_im = |x: f64| x >= bbox.im.0 && x <= bbox.im.1;
    let mut push_tz = |i: usize, k: usize, sign: i8, r: usize, s: usize, base: C64| {
        // enumerate l so that Re lands in the box
        if !in_im(base.im) {
            return;
        }
        let lo = (bbox.re.0 - base.re).ceil() as i64;
        let hi = (bbox.re.1 - base.re).floor() as i64;
        for l in lo..=hi {
            out.push(PoleHyperplane {
                kind: PoleKind::TMinusZ { i, k },
                sign,
                r,
                s,
                l,
                offset: c64(base - z[k] + l as f64),
                order: 1,
            });
        }
    };
    for i in 0..m {
        for k in 0..n {
            for r in 0..=caps.r_max {
                for s in 0..=caps.s_max {
                    let lat = r as f64 * params.p + s as f64 * params.tau;
                    push_tz(i, k, -1, r, s, z[k] - a[k] - lat);
                    push_tz(i, k, 1, r, s, z[k] + a[k] + lat);
                }
            }
        }
    }
    // t−t family: the difference box is (re-width, im-width) symmetrized
    let diff_re = (bbox.re.0 - bbox.re.1, bbox.re.1 - bbox.re.0);
    let diff_im = (bbox.im.0 - bbox.im.1, bbox.im.1 - bbox.im.0);
    for i in 0..m {
        for j in i + 1..m {
            for r in 0..=caps.r_max {
                for s in 0..=caps.s_max {
                    let lat = r as f64 * params.p + s as f64 * params.tau;
                    for (sign, base) in [(-1i8, 2.0 * params.eta - lat), (1, -2.0 * params.eta + lat)]
                    {
                        if base.im < diff_im.0 || base.im > diff_im.1 {
                            continue;
                        }
                        let lo = (diff_re.0 - base.re).ceil() as i64;
                        let hi = (diff_re.1 - base.re).floor() as i64;
                        for l in lo..=hi {
                            out.push(PoleHyperplane {
                                kind: PoleKind::TMinusT { i, j },
                                sign,
                                r,
                                s,
                                l,
                                offset: c64(base + l as f64),
                                order: 1,
                            });
                        }
                    }
                }
            }
        }
    }
    out
}

/// Distance (in |Im t|) of the nearest catalog pole to the real integration
/// torus {Im t = 0}. The real parts never matter: l runs over all of ℤ.
pub fn torus_pole_distance(params: &ModelParams, z: &[C64], caps: &CatalogCaps) -> f64 {
    let a = params.a_vec();
    let mut best = f64::INFINITY;
    for k in 0..params.n() {
        for r in 0..=caps.r_max {
            for s in 0..=caps.s_max {
                let lat_im = r as f64 * params.p.im + s as f64 * params.tau.im;
                best = best.min((z[k].im - a[k].im - lat_im).abs());
                best = best.min((z[k].im + a[k].im + lat_im).abs());
            }
        }
    }
    if params.m >= 2 {
        for r in 0..=caps.r_max {
            for s in 0..=caps.s_max {
                let lat_im = r as f64 * params.p.im + s as f64 * params.tau.im;
                best = best.min((2.0 * params.eta.im - lat_im).abs());
                best = best.min((-2.0 * params.eta.im + lat_im).abs());
            }
        }
    }
    best
}

/// One validated condition with its numeric margin.
#[derive(Debug, Clone, Serialize)]
pub struct ConditionCheck {
    pub name: String,
    pub pass: bool,
    pub margin: f64,
    pub detail: String,
}

/// The full validator report.
#[derive(Debug, Clone, Serialize)]
pub struct ValidationReport {
    pub checks: Vec<ConditionCheck>,
    pub all_pass: bool,
}

impl ValidationReport {
    pub fn get(&self, name: &str) -> Option<&ConditionCheck> {
        self.checks.iter().find(|c| c.name == name)
    }
}

/// Knobs for the validator.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct ValidationOptions {
    /// Threshold for the "much greater" regime ratios.
    pub r_min: f64,
    /// Integer window for the approximate lattice and independence checks.
    pub combo_cap: i64,
    /// Distance below which a lattice condition counts as failed.
    pub lattice_tol: f64,
}

impl Default for ValidationOptions {
    fn default() -> Self {
        ValidationOptions {
            r_min: 10.0,
            combo_cap: 8,
            lattice_tol: 1e-6,
        }
    }
}

/// min |x − (l + rτ + sp)| over |r|,|s|,|l| ≤ cap.
fn lattice_gap(x: C64, tau: C64, p: C64, cap: i64) -> f64 {
    let mut best = f64::INFINITY;
    for r in -cap..=cap {
        for s in -cap..=cap {
            let y = x - r as f64 * tau - s as f64 * p;
            let d = (y.re - y.re.round()).hypot(y.im);
            // the integer part is handled by rounding Re only when Im is small;
            // otherwise measure the true complex distance over l
            let l = y.re.round();
            let d2 = (y - l).norm();
            best = best.min(d.min(d2));
        }
    }
    best
}

/// Validate the parameter set against the genericity and regime conditions.
///
/// Reported conditions: `im.tau`, `im.p`, `im.eta` (sign conditions),
/// `indep` (ℤ-independence of τ and p), `eta` and `a-generic` and `z-generic`
/// (approximate-lattice genericity), `im.a` (Im a_k > 0), `hor.a` and
/// `hor.eta` (starting-range ratios), and `sum` (Σa_k = 2ηm bookkeeping).
/// The report never fails hard; callers gate on the conditions they need.
pub fn validate_params(params: &ModelParams, z: &[C64], opts: &ValidationOptions) -> ValidationReport {
    let mut checks = Vec::new();
    let tau = params.tau;
    let p = params.p;
    let eta = params.eta;
    let a = params.a_vec();
    let m = params.m;

    let mut push = |name: &str, pass: bool, margin: f64, detail: String| {
        checks.push(ConditionCheck {
            name: name.to_string(),
            pass,
            margin,
            detail,
        });
    };

    push("im.tau", tau.im > 0.0, tau.im, format!("Im τ = {}", tau.im));
    push("im.p", p.im > 0.0, p.im, format!("Im p = {}", p.im));
    push(
        "im.eta",
        eta.im < 0.0,
        -eta.im,
        format!("Im η = {} (condition: negative)", eta.im),
    );

    // ℤ-independence of τ and p: no small combo aτ+bp+c vanishes
    let mut indep = f64::INFINITY;
    for ai in -opts.combo_cap..=opts.combo_cap {
        for bi in -opts.combo_cap..=opts.combo_cap {
            if ai == 0 && bi == 0 {
                continue;
            }
            let v = ai as f64 * tau + bi as f64 * p;
            indep = indep.min((v.re - v.re.round()).hypot(v.im));
        }
    }
    push(
        "indep",
        indep > opts.lattice_tol,
        indep,
        format!("min |aτ+bp+c| = {indep:.3e} over |a|,|b| ≤ {}", opts.combo_cap),
    );

    // {2η,…,2mη} off the lattice ℤ+τℤ+pℤ
    let mut eta_gap = f64::INFINITY;
    for k in 1..=m.max(1) {
        eta_gap = eta_gap.min(lattice_gap(2.0 * k as f64 * eta, tau, p, opts.combo_cap));
    }
    push(
        "eta",
        eta_gap > opts.lattice_tol,
        eta_gap,
        format!("min distance of 2kη to ℤ+τℤ+pℤ: {eta_gap:.3e}"),
    );

    // 2a_k + 2sη off the lattice
    let mut a_gap = f64::INFINITY;
    for ak in &a {
        for s in -(m as i64 - 1).max(0)..=(m as i64 - 1).max(0) {
            a_gap = a_gap.min(lattice_gap(
                2.0 * ak + 2.0 * s as f64 * eta,
                tau,
                p,
                opts.combo_cap,
            ));
        }
    }
    push(
        "a-generic",
        a_gap > opts.lattice_tol,
        a_gap,
        format!("min distance of 2a_k+2sη to the lattice: {a_gap:.3e}"),
    );

    // z_l ± a_l − z_k ± a_k + 2sη off the lattice, l ≠ k
    let mut z_gap = f64::INFINITY;
    for l in 0..z.len() {
        for k in 0..z.len() {
            if l == k {
                continue;
            }
            for (sl, sk) in [(1.0, 1.0), (1.0, -1.0), (-1.0, 1.0), (-1.0, -1.0)] {
                for s in -(m as i64 - 1).max(0)..=(m as i64 - 1).max(0) {
                    let x = z[l] + sl * a[l] - z[k] + sk * a[k] + 2.0 * s as f64 * eta;
                    z_gap = z_gap.min(lattice_gap(x, tau, p, opts.combo_cap));
                }
            }
        }
    }
    if z.len() > 1 {
        push(
            "z-generic",
            z_gap > opts.lattice_tol,
            z_gap,
            format!("min distance of z_l±a_l−z_k±a_k+2sη to the lattice: {z_gap:.3e}"),
        );
    }

    let min_im_a = a.iter().map(|x| x.im).fold(f64::INFINITY, f64::min);
    push(
        "im.a",
        min_im_a > 0.0,
        min_im_a,
        format!("min Im a_k = {min_im_a:.3e}"),
    );

    let small = tau.im.max(p.im);
    push(
        "hor.a",
        min_im_a / small > opts.r_min,
        min_im_a / small,
        format!(
            "min Im a_k / max(Im τ, Im p) = {:.2} (threshold {})",
            min_im_a / small,
            opts.r_min
        ),
    );
    // The η half of the starting range only constrains the t_i−t_j pole
    // families, which exist for m ≥ 2.
    let eta_ratio = -eta.im / small;
    push(
        "hor.eta",
        if m >= 2 { eta_ratio > opts.r_min } else { true },
        eta_ratio,
        if m >= 2 {
            format!("−Im η / max(Im τ, Im p) = {eta_ratio:.2} (threshold {})", opts.r_min)
        } else {
            format!("−Im η / max(Im τ, Im p) = {eta_ratio:.2} (vacuous for m ≤ 1)")
        },
    );

    let sum: C64 = a.iter().sum();
    let defect = (sum - 2.0 * eta * m as f64).norm();
    push(
        "sum",
        defect < 1e-9,
        -defect,
        format!("|Σa_k − 2ηm| = {defect:.3e}"),
    );

    let all_pass = checks.iter().all(|c| c.pass);
    ValidationReport { checks, all_pass }
}
