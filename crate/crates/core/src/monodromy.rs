//! Monodromy of the hypergeometric solutions: transport under permutations of
//! the z-points and under shifts z_j → z_j+τ and z_j → z_j+1, with
//! coefficients in the dual R̃-matrix of modulus p.
//!
//! The dual R-matrix is the diagonal dressing
//!
//! ```text
//! R̃_{A,B}(z,μ,p) = e^{2πiηABz/p}
//!     · (α(μ−2η(h⁽¹⁾+h⁽²⁾))/α(μ−2ηh⁽²⁾))^{z/p}
//!     · R_{A,B}(z,μ,p)
//!     · (α(μ)/α(μ−2ηh⁽¹⁾))^{z/p},
//! ```
//!
//! with fractional powers in the analytic-exponent convention and h⁽¹⁾, h⁽²⁾
//! read on the source resp. target component. This form is exactly what the
//! conjugation D_σ(μ,z_σ,p) · P R(z_j−z_{j+1}, μ, p) · D(μ,z,p)^{-1} collapses
//! to; on zero-weight blocks it agrees with reading the α-arguments of the
//! defining display as μ. R̃ is p-periodic in z.
//!
//! Transported solutions:
//! - permutation: Ψ_j = P⁽ʲ·ʲ⁺¹⁾R_{Λ_j,Λ_{j+1}}(z_{j+1}−z_j, λ−2ηΣ_{l<j}h⁽ˡ⁾, τ)
//!   applied to Ψ(…,z_{j+1},z_j,…), expressed back through (1⊗P R̃)Ψ;
//! - z_j+τ: (B_j(z,λ,p)⊗1)Ψ(…,z_j+τ,…) = (1⊗K̃_j)Ψ with the p-periodic
//!   coefficient K̃_j = f_j·D(…,z_j+τ,…,μ,p) K_j(z,μ,p,τ) D^{-1}(z,μ,p);
//! - z_j+1: Ψ^ξ(…,z_j+1,…) = (1⊗D_j(μ)^{1/p}) Ψ^{ξ_j} with ξ_j(x) = ξ(x−2ηΛ_j).

use std::sync::Arc;

use num_complex::Complex64 as C64;

use crate::error::Result;
use crate::hyper::{theta2_multiplier, HyperContext};
use crate::linalg::CMat;
use crate::qkzb::{d_power, d_product, probe_lambda_fn, KzbContext, LambdaFn};
use crate::rmatrix::RContext;
use crate::space::{Composition, ModelParams};
use crate::theta::alpha_ratio_exponent;
use crate::two_pi_i;
use crate::weight::ModulusSelect;

/// One weight-space block of R̃_{A,B}(z,μ,p).
#[derive(Debug, Clone)]
pub struct TildeRMatrix {
    pub weight_a: C64,
    pub weight_b: C64,
    pub z: C64,
    pub mu: C64,
    pub level: usize,
    pub entries: CMat,
    /// Set when an α-ratio exponent had |Im E| > π, i.e. where a principal-
    /// logarithm convention would have picked another sheet.
    pub branch_warning: bool,
}

/// Build the level block of R̃_{A,B}(z,μ,p) from the modulus-p R-matrix.
///
/// `alpha_arg` is the argument of the α-ratios; it defaults to μ (the dual
/// reading of the defining display, validated against the D-conjugation by
/// [`permutation_matrix_residual`]).
pub fn tilde_r(
    rctx_p: &RContext,
    weight_a: C64,
    weight_b: C64,
    z: C64,
    mu: C64,
    level: usize,
    p: C64,
    alpha_arg: Option<C64>,
) -> Result<TildeRMatrix> {
    let eta = rctx_p.eta;
    let nu = alpha_arg.unwrap_or(mu);
    let base = rctx_p.block(weight_a, weight_b, z, mu, level)?;
    let dim = level + 1;
    let h_total = weight_a + weight_b - 2.0 * level as f64;
    let scalar = (two_pi_i() * eta * weight_a * weight_b * z / p).exp();
    let mut warning = false;
    let mut pow = |e: C64| -> C64 {
        if e.im.abs() > std::f64::consts::PI {
            warning = true;
        }
        (z / p * e).exp()
    };
    // target side: α(ν−2ηH)/α(ν−2ηh⁽²⁾), h⁽²⁾ = B−2(level−k)
    let left: Vec<C64> = (0..dim)
        .map(|k| {
            pow(alpha_ratio_exponent(
                nu - 2.0 * eta * h_total,
                nu - 2.0 * eta * (weight_b - 2.0 * (level - k) as f64),
                eta,
            ))
        })
        .collect();
    // source side: α(ν)/α(ν−2ηh⁽¹⁾), h⁽¹⁾ = A−2i
    let right: Vec<C64> = (0..dim)
        .map(|i| {
            pow(alpha_ratio_exponent(
                nu,
                nu - 2.0 * eta * (weight_a - 2.0 * i as f64),
                eta,
            ))
        })
        .collect();
    let mut entries = CMat::zeros(dim);
    for k in 0..dim {
        for i in 0..dim {
            entries[(k, i)] = scalar * left[k] * base.entries[(k, i)] * right[i];
        }
    }
    Ok(TildeRMatrix {
        weight_a,
        weight_b,
        z,
        mu,
        level,
        entries,
        branch_warning: warning,
    })
}

/// p-periodicity residual of R̃ at one level.
pub fn tilde_r_periodicity(
    rctx_p: &RContext,
    weight_a: C64,
    weight_b: C64,
    z: C64,
    mu: C64,
    level: usize,
    p: C64,
) -> Result<f64> {
    let base = tilde_r(rctx_p, weight_a, weight_b, z, mu, level, p, None)?;
    let shifted = tilde_r(rctx_p, weight_a, weight_b, z + p, mu, level, p, None)?;
    Ok(shifted.entries.max_abs_diff(&base.entries) / base.entries.max_abs())
}

/// The permutation transport P⁽ʲ·ʲ⁺¹⁾R_{Λ_j,Λ_{j+1}}(z_{j+1}−z_j,
/// λ−2ηΣ_{l<j}h⁽ˡ⁾, τ) applied to a V[0]-valued λ-function (which the caller
/// has already evaluated at the swapped z-tuple). The result lives in the
/// zero-weight space of the swapped weight order.
pub fn permutation_transport(
    params: &ModelParams,
    rctx_tau: &Arc<RContext>,
    j: usize,
    z: &[C64],
    psi_swapped_z: &LambdaFn,
) -> LambdaFn {
    let params = params.clone();
    let rctx = rctx_tau.clone();
    let psi = psi_swapped_z.clone();
    let space = psi.space.clone();
    let space_out = params.swapped(j - 1).zero_weight_space();
    let zj = z[j - 1];
    let zj1 = z[j];
    let out_space = space_out.clone();
    LambdaFn::new(space_out, move |lambda| {
        let v = psi.eval(lambda)?;
        let mut out = vec![C64::new(0.0, 0.0); out_space.dim()];
        for (idx, comp) in space.comps().iter().enumerate() {
            if v[idx].norm() == 0.0 {
                continue;
            }
            let parts = comp.parts();
            let level = parts[j - 1] + parts[j];
            let shift: C64 = (0..j - 1)
                .map(|l| params.lambdas[l] - 2.0 * parts[l] as f64)
                .sum();
            let block = rctx.block(
                params.lambdas[j - 1],
                params.lambdas[j],
                zj1 - zj,
                lambda - 2.0 * params.eta * shift,
                level,
            )?;
            for tgt_first in 0..=level {
                let coeff = block.entries[(tgt_first, parts[j - 1])];
                if coeff.norm() == 0.0 {
                    continue;
                }
                let mut tgt = parts.to_vec();
                tgt[j - 1] = tgt_first;
                tgt[j] = level - tgt_first;
                // P swaps the two slots into the σ-ordered space
                let sigma = Composition(tgt).swapped(j - 1);
                out[out_space.idx(&sigma)] += coeff * v[idx];
            }
        }
        Ok(out)
    })
}

/// Matrix of the M-slot operator appearing in the permutation monodromy, in
/// its D-conjugated form (n = 2, j = 1):
/// D_σ(μ, (z₂,z₁), p) · P R_{Λ₁,Λ₂}(z₁−z₂, μ, p) · D(μ, (z₁,z₂), p)^{-1},
/// mapping V[0] → V_σ[0].
fn permutation_coefficient_conjugated(
    params: &ModelParams,
    rctx_p: &Arc<RContext>,
    z: &[C64],
    mu: C64,
) -> Result<CMat> {
    let params_sigma = params.swapped(0);
    let space = params.zero_weight_space();
    let space_sigma = params_sigma.zero_weight_space();
    let z_sigma = [z[1], z[0]];
    let d_orig = d_product(params, &space, mu, z, params.p);
    let d_sigma = d_product(&params_sigma, &space_sigma, mu, &z_sigma, params.p);
    let dim = space.dim();
    let mut out = CMat::zeros(dim);
    for (src_idx, comp) in space.comps().iter().enumerate() {
        let parts = comp.parts();
        let level = parts[0] + parts[1];
        let block = rctx_p.block(params.lambdas[0], params.lambdas[1], z[0] - z[1], mu, level)?;
        for tgt_first in 0..=level {
            let coeff = block.entries[(tgt_first, parts[0])];
            let tgt = Composition(vec![level - tgt_first, tgt_first]); // after P
            let tgt_idx = space_sigma.idx(&tgt);
            out[(tgt_idx, src_idx)] +=
                d_sigma.diag[tgt_idx] * coeff * d_orig.diag[src_idx].finv();
        }
    }
    Ok(out)
}

/// Matrix of (1 ⊗ P R̃_{Λ₁,Λ₂}(z₁−z₂, μ, p)) on the M-slot (n = 2, j = 1).
fn permutation_coefficient_tilde(
    params: &ModelParams,
    rctx_p: &Arc<RContext>,
    z: &[C64],
    mu: C64,
) -> Result<(CMat, bool)> {
    let space = params.zero_weight_space();
    let space_sigma = params.swapped(0).zero_weight_space();
    let dim = space.dim();
    let mut out = CMat::zeros(dim);
    let mut warning = false;
    for (src_idx, comp) in space.comps().iter().enumerate() {
        let parts = comp.parts();
        let level = parts[0] + parts[1];
        let tr = tilde_r(
            rctx_p,
            params.lambdas[0],
            params.lambdas[1],
            z[0] - z[1],
            mu,
            level,
            params.p,
            None,
        )?;
        warning |= tr.branch_warning;
        for tgt_first in 0..=level {
            let coeff = tr.entries[(tgt_first, parts[0])];
            let tgt = Composition(vec![level - tgt_first, tgt_first]);
            out[(space_sigma.idx(&tgt), src_idx)] += coeff;
        }
    }
    Ok((out, warning))
}

/// Pure-matrix residual between the D-conjugated coefficient of the
/// permutation monodromy and its R̃ form; no integrals involved.
pub fn permutation_matrix_residual(params: &ModelParams, z: &[C64], mu: C64) -> Result<f64> {
    let rctx_p = RContext::from_params(params, ModulusSelect::P);
    let conj = permutation_coefficient_conjugated(params, &rctx_p, z, mu)?;
    let (tilde, _) = permutation_coefficient_tilde(params, &rctx_p, z, mu)?;
    Ok(conj.max_abs_diff(&tilde) / conj.max_abs())
}

/// Integral-backed verification of the permutation monodromy (n = 2, j = 1):
/// compares Ψ_j built by transporting the swapped-weight solution against
/// (1 ⊗ P R̃)Ψ at the sample points. Returns the maximum relative residual.
pub fn verify_permutation_monodromy(
    ctx: &Arc<HyperContext>,
    lambdas: &[C64],
    mus: &[C64],
    z: &[C64],
) -> Result<f64> {
    let params = &ctx.params;
    assert_eq!(params.n(), 2, "permutation monodromy check is for n = 2");
    let params_sigma = params.swapped(0);
    let ctx_sigma = HyperContext::new(&params_sigma, ctx.xi.clone(), ctx.quad);
    let rctx_tau = RContext::from_params(params, ModulusSelect::Tau);
    let rctx_p = RContext::from_params(params, ModulusSelect::P);
    let z_sigma = [z[1], z[0]];
    let space = params.zero_weight_space();
    let space_sigma = params_sigma.zero_weight_space();
    let dim = space.dim();

    let mut worst: f64 = 0.0;
    for (&lambda, &mu) in lambdas.iter().zip(mus) {
        // side 1: (P R_{Λ₂,Λ₁}(z₂−z₁, λ, τ) ⊗ D_σ(μ, z_σ, p)) u^{σ}(z_σ)
        let u_sigma = ctx_sigma.u_matrix(lambda, mu, &z_sigma)?;
        let d_sigma = d_product(&params_sigma, &space_sigma, mu, &z_sigma, params.p);
        // λ-slot operator: acts on V_σ[0] and lands in V[0]
        let mut a1 = CMat::zeros(dim);
        for (src_idx, comp) in space_sigma.comps().iter().enumerate() {
            let parts = comp.parts();
            let level = parts[0] + parts[1];
            let block = rctx_tau.block(
                params_sigma.lambdas[0],
                params_sigma.lambdas[1],
                z[1] - z[0],
                lambda,
                level,
            )?;
            for tgt_first in 0..=level {
                let tgt = Composition(vec![level - tgt_first, tgt_first]); // after P: V[0]
                a1[(space.idx(&tgt), src_idx)] += block.entries[(tgt_first, parts[0])];
            }
        }
        let mut side1 = CMat::zeros(dim);
        for l in 0..dim {
            for ms in 0..dim {
                let mut acc = C64::new(0.0, 0.0);
                for ls in 0..dim {
                    acc += a1[(l, ls)] * u_sigma[(ls, ms)];
                }
                side1[(l, ms)] = acc * d_sigma.diag[ms];
            }
        }

        // side 2: (1 ⊗ P R̃_{Λ₁,Λ₂}(z₁−z₂, μ, p)) (1 ⊗ D(μ,z,p)) u(z)
        let u = ctx.u_matrix(lambda, mu, z)?;
        let d = d_product(params, &space, mu, z, params.p);
        let (b2, _) = permutation_coefficient_tilde(params, &rctx_p, z, mu)?;
        let mut side2 = CMat::zeros(dim);
        for l in 0..dim {
            for ms in 0..dim {
                let mut acc = C64::new(0.0, 0.0);
                for m in 0..dim {
                    acc += u[(l, m)] * d.diag[m] * b2[(ms, m)];
                }
                side2[(l, ms)] = acc;
            }
        }

        let scale = side1.max_abs().max(side2.max_abs()).max(f64::MIN_POSITIVE);
        worst = worst.max(side1.max_abs_diff(&side2) / scale);
    }
    Ok(worst)
}

/// Report of the τ-shift monodromy verification.
#[derive(Debug, Clone)]
pub struct TauShiftReport {
    pub residual: f64,
    pub coefficient_periodicity: f64,
}

/// The monodromy coefficient exponential
/// f_j(z,p) = e^{2πiη Σ_{l≠j}(z_j−z_l)Λ_lΛ_j/p}; the sign matches B_j = f_j·D_j.
pub fn f_coefficient(params: &ModelParams, j: usize, z: &[C64]) -> C64 {
    let mut acc = C64::new(0.0, 0.0);
    for l in 0..params.n() {
        if l != j - 1 {
            acc += (z[j - 1] - z[l]) * params.lambdas[l] * params.lambdas[j - 1];
        }
    }
    (two_pi_i() * params.eta * acc / params.p).exp()
}

/// Apply the p-periodic coefficient operator
/// K̃_j = f_j(z,p) · D(…,z_j+τ,…,μ,p) ∘ K_j(z,μ,p,τ) ∘ D^{-1}(z,μ,p)
/// to a μ-function on the M-slot.
pub fn apply_coefficient_operator(
    params: &ModelParams,
    kctx_dual: &Arc<KzbContext>,
    j: usize,
    z: &[C64],
    psi_mu: &LambdaFn,
) -> LambdaFn {
    let space = params.zero_weight_space();
    let f = f_coefficient(params, j, z);
    let d_inv = d_product(params, &space, C64::new(0.0, 0.0), z, params.p); // placeholder
    drop(d_inv);
    let params_c = params.clone();
    let z_own = z.to_vec();
    let pre = psi_mu.scaled_by(move |mu| {
        let space = params_c.zero_weight_space();
        Ok(d_product(&params_c, &space, mu, &z_own, params_c.p)
            .diag
            .into_iter()
            .map(|d| d.finv())
            .collect())
    });
    let mid = kctx_dual.apply_k(j, z, &pre);
    let mut z_tau = z.to_vec();
    z_tau[j - 1] += params.tau;
    let params_c2 = params.clone();
    mid.scaled_by(move |mu| {
        let space = params_c2.zero_weight_space();
        Ok(d_product(&params_c2, &space, mu, &z_tau, params_c2.p)
            .diag
            .into_iter()
            .map(|d| d * f)
            .collect())
    })
}

/// Integral-backed verification of the τ-shift monodromy
/// (B_j(z,λ,p)⊗1)Ψ(…,z_j+τ,…) = (1⊗K̃_j)Ψ(z), plus the p-periodicity of K̃_j.
pub fn verify_tau_shift_monodromy(
    ctx: &Arc<HyperContext>,
    j: usize,
    lambdas: &[C64],
    mus: &[C64],
    z: &[C64],
) -> Result<TauShiftReport> {
    let params = &ctx.params;
    let space = params.zero_weight_space();
    let dim = space.dim();
    let kctx_primal = KzbContext::primal(params);
    let kctx_dual = KzbContext::dual(params);

    let mut z_tau = z.to_vec();
    z_tau[j - 1] += params.tau;

    let mut worst: f64 = 0.0;
    for (&lambda, &mu) in lambdas.iter().zip(mus) {
        // LHS: B_j(z,λ,p) on the λ-slot of Ψ(…,z_j+τ,…)
        let u_tau = ctx.u_matrix(lambda, mu, &z_tau)?;
        let d_tau = d_product(params, &space, mu, &z_tau, params.p);
        let b = kctx_primal.b_diag(j, z, lambda);
        let mut lhs = CMat::zeros(dim);
        for l in 0..dim {
            for m in 0..dim {
                lhs[(l, m)] = b[l] * u_tau[(l, m)] * d_tau.diag[m];
            }
        }
        // RHS: K̃_j on the μ-functions of the M-slot of Ψ(z)
        let mut rhs = CMat::zeros(dim);
        for l_idx in 0..dim {
            let ctx_c = ctx.clone();
            let z_own = z.to_vec();
            let params_c = params.clone();
            let row = LambdaFn::new(space.clone(), move |mu_val| {
                let mat = ctx_c.u_matrix(lambda, mu_val, &z_own)?;
                let space_l = params_c.zero_weight_space();
                let d = d_product(&params_c, &space_l, mu_val, &z_own, params_c.p);
                Ok((0..space_l.dim())
                    .map(|m| mat[(l_idx, m)] * d.diag[m])
                    .collect())
            });
            let applied = apply_coefficient_operator(params, &kctx_dual, j, z, &row);
            let v = applied.eval(mu)?;
            for m in 0..dim {
                rhs[(l_idx, m)] = v[m];
            }
        }
        let scale = lhs.max_abs().max(rhs.max_abs()).max(f64::MIN_POSITIVE);
        worst = worst.max(lhs.max_abs_diff(&rhs) / scale);
    }

    // p-periodicity of the coefficient operator on probe μ-functions
    let mut period: f64 = 0.0;
    let probe = probe_lambda_fn(params, space.clone(), 4111);
    for k in 1..=params.n() {
        let mut z_p = z.to_vec();
        z_p[k - 1] += params.p;
        let at_z = apply_coefficient_operator(params, &kctx_dual, j, z, &probe);
        let at_zp = apply_coefficient_operator(params, &kctx_dual, j, &z_p, &probe);
        period = period.max(crate::qkzb::lambda_fn_residual(&at_z, &at_zp, mus)?);
    }
    Ok(TauShiftReport {
        residual: worst,
        coefficient_periodicity: period,
    })
}

/// Verification of the z_j → z_j+1 monodromy
/// Ψ^ξ(…,z_j+1,…) = (1⊗D_j(μ)^{1/p}) Ψ^{ξ_j}(z), ξ_j(x) = ξ(x−2ηΛ_j).
/// Returns (residual, branch_warning).
pub fn verify_one_shift_monodromy(
    ctx: &Arc<HyperContext>,
    j: usize,
    lambdas: &[C64],
    mus: &[C64],
    z: &[C64],
) -> Result<(f64, bool)> {
    let params = &ctx.params;
    let space = params.zero_weight_space();
    let dim = space.dim();
    let xi_j = ctx.xi.shifted(2.0 * params.eta * params.lambdas[j - 1]);
    let ctx_j = ctx.with_xi(xi_j);
    let mut z_one = z.to_vec();
    z_one[j - 1] += 1.0;

    let mut worst: f64 = 0.0;
    let mut warning = false;
    for (&lambda, &mu) in lambdas.iter().zip(mus) {
        let u_one = ctx.u_matrix(lambda, mu, &z_one)?;
        let d_one = d_product(params, &space, mu, &z_one, params.p);
        let u_j = ctx_j.u_matrix(lambda, mu, z)?;
        let d_base = d_product(params, &space, mu, z, params.p);
        let dpow = d_power(params, &space, j, mu, params.p.finv());
        warning |= dpow.branch_warning || d_one.branch_warning || d_base.branch_warning;
        let mut lhs = CMat::zeros(dim);
        let mut rhs = CMat::zeros(dim);
        for l in 0..dim {
            for m in 0..dim {
                lhs[(l, m)] = u_one[(l, m)] * d_one.diag[m];
                rhs[(l, m)] = u_j[(l, m)] * d_base.diag[m] * dpow.diag[m];
            }
        }
        let scale = lhs.max_abs().max(rhs.max_abs()).max(f64::MIN_POSITIVE);
        worst = worst.max(lhs.max_abs_diff(&rhs) / scale);
    }
    Ok((worst, warning))
}

/// Which transported function the theta-property preservation check builds.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ThetaTransform {
    /// T_j: permutation transport (preserves the properties).
    Perm,
    /// (T_j)² for the τ-shift transport; needs natural weights.
    TauShiftSquared,
    /// Ψ(…,z_j+2,…); needs natural weights.
    OneShiftSquared,
    /// Single τ-shift transport: negative control, breaks (theta2).
    TauShiftSingle,
}

/// Residuals of (theta1), (theta2) for the transformed solution. The base
/// solution must be in the theta-level regime (−p/4η = N, μ = 2η(m+2s)).
pub fn theta_preservation_check(
    ctx: &Arc<HyperContext>,
    transform: ThetaTransform,
    j: usize,
    z: &[C64],
    f: Vec<C64>,
    mu: C64,
    lambdas: &[C64],
) -> Result<(f64, f64)> {
    let params = &ctx.params;
    let crate::hyper::XiKind::ThetaLevel { level } = ctx.xi.kind else {
        return Err(crate::error::Error::InvalidParameter(
            "theta preservation checks need a theta-level ξ".into(),
        ));
    };
    let total_level = params.m as f64 + level as f64;

    // the transformed function, its weight order, and the z at which its
    // theta properties are stated
    let (transformed, check_params): (LambdaFn, ModelParams) = match transform {
        ThetaTransform::Perm => {
            let rctx_tau = RContext::from_params(params, ModulusSelect::Tau);
            let z_sigma: Vec<C64> = {
                let mut v = z.to_vec();
                v.swap(j - 1, j);
                v
            };
            let psi_swapped = ctx.psi_solution(f.clone(), mu, &z_sigma);
            (
                permutation_transport(params, &rctx_tau, j, z, &psi_swapped),
                params.swapped(j - 1),
            )
        }
        ThetaTransform::TauShiftSquared => {
            let kctx = KzbContext::primal(params);
            let mut z_2tau = z.to_vec();
            z_2tau[j - 1] += 2.0 * params.tau;
            let psi = ctx.psi_solution(f.clone(), mu, &z_2tau);
            let mut z_tau = z.to_vec();
            z_tau[j - 1] += params.tau;
            let once = kctx.transport_tau(j, &z_tau, &psi);
            (kctx.transport_tau(j, z, &once), params.clone())
        }
        ThetaTransform::OneShiftSquared => {
            let mut z_2 = z.to_vec();
            z_2[j - 1] += 2.0;
            (ctx.psi_solution(f.clone(), mu, &z_2), params.clone())
        }
        ThetaTransform::TauShiftSingle => {
            let kctx = KzbContext::primal(params);
            let mut z_tau = z.to_vec();
            z_tau[j - 1] += params.tau;
            let psi = ctx.psi_solution(f.clone(), mu, &z_tau);
            (kctx.transport_tau(j, z, &psi), params.clone())
        }
    };

    let space = check_params.zero_weight_space();
    let mut r1: f64 = 0.0;
    let mut r2: f64 = 0.0;
    for &lambda in lambdas {
        let v0 = transformed.eval(lambda)?;
        let scale = v0.iter().map(|x| x.norm()).fold(f64::MIN_POSITIVE, f64::max);
        let v1 = transformed.eval(lambda + 1.0)?;
        for (a, b) in v1.iter().zip(&v0) {
            r1 = r1.max((a - b).norm() / scale);
        }
        let vt = transformed.eval(lambda + params.tau)?;
        let scale_t = vt
            .iter()
            .chain(&v0)
            .map(|x| x.norm())
            .fold(f64::MIN_POSITIVE, f64::max);
        for (idx, comp) in space.comps().iter().enumerate() {
            let mult = theta2_multiplier(&check_params, comp, total_level, lambda, z);
            r2 = r2.max((vt[idx] - mult * v0[idx]).norm() / scale_t);
        }
    }
    Ok((r1, r2))
}

/// Dynamical Yang–Baxter residual for R̃ with modulus p on the total-degree
/// `level` subspace, analogous to the check for R.
pub fn check_tilde_dybe(
    params: &ModelParams,
    weights: (C64, C64, C64),
    z: C64,
    w: C64,
    mu: C64,
    level: usize,
) -> Result<f64> {
    let rctx_p = RContext::from_params(params, ModulusSelect::P);
    let eta = params.eta;
    let p = params.p;
    let states: Vec<Vec<usize>> = crate::space::compositions(level, 3)
        .into_iter()
        .map(|c| c.0)
        .collect();
    let index: std::collections::HashMap<Vec<usize>, usize> = states
        .iter()
        .cloned()
        .enumerate()
        .map(|(i, s)| (s, i))
        .collect();
    let wts = [weights.0, weights.1, weights.2];
    let h = move |st: &[usize], slot: usize| -> C64 { wts[slot] - 2.0 * st[slot] as f64 };

    let apply = |pair: (usize, usize),
                 ws: (C64, C64),
                 zz: C64,
                 mu_of: &dyn Fn(&[usize]) -> C64,
                 v: &[C64]|
     -> Result<Vec<C64>> {
        let mut out = vec![C64::new(0.0, 0.0); v.len()];
        for (src_idx, st) in states.iter().enumerate() {
            if v[src_idx].norm() == 0.0 {
                continue;
            }
            let lvl = st[pair.0] + st[pair.1];
            let tr = tilde_r(&rctx_p, ws.0, ws.1, zz, mu_of(st), lvl, p, None)?;
            for tgt_first in 0..=lvl {
                let coeff = tr.entries[(tgt_first, st[pair.0])];
                if coeff.norm() == 0.0 {
                    continue;
                }
                let mut tgt = st.clone();
                tgt[pair.0] = tgt_first;
                tgt[pair.1] = lvl - tgt_first;
                out[index[&tgt]] += coeff * v[src_idx];
            }
        }
        Ok(out)
    };

    let mut worst: f64 = 0.0;
    for basis_idx in 0..states.len() {
        let mut v = vec![C64::new(0.0, 0.0); states.len()];
        v[basis_idx] = C64::new(1.0, 0.0);
        let l1 = apply(
            (1, 2),
            (weights.1, weights.2),
            w,
            &|st| mu - 2.0 * eta * h(st, 0),
            &v,
        )?;
        let l2 = apply((0, 2), (weights.0, weights.2), z + w, &|_| mu, &l1)?;
        let l3 = apply(
            (0, 1),
            (weights.0, weights.1),
            z,
            &|st| mu - 2.0 * eta * h(st, 2),
            &l2,
        )?;
        let r1 = apply((0, 1), (weights.0, weights.1), z, &|_| mu, &v)?;
        let r2 = apply(
            (0, 2),
            (weights.0, weights.2),
            z + w,
            &|st| mu - 2.0 * eta * h(st, 1),
            &r1,
        )?;
        let r3 = apply((1, 2), (weights.1, weights.2), w, &|_| mu, &r2)?;
        let scale = l3
            .iter()
            .chain(&r3)
            .map(|x| x.norm())
            .fold(f64::MIN_POSITIVE, f64::max);
        for (a, b) in l3.iter().zip(&r3) {
            worst = worst.max((a - b).norm() / scale);
        }
    }
    Ok(worst)
}
