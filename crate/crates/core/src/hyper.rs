//! Hypergeometric integrals over the torus [0,N]^m and the solution tensor u.
//!
//! The coordinates of the V[0]⊗V[0]-valued function u are
//!
//! ```text
//! u_{LM}(z,λ,μ) = e^{−πiμλ/2η} ∫_{[0,N]^m} ξ(pλ+τμ−Σ2a_l z_l+4ηΣt_j)
//!                 · Ω(t,z) · ω_L(t,λ,z;τ) · ω_M(t,μ,z;p) dt,
//! ```
//!
//! where ξ is entire and 4ηN-periodic. The integrand is N-periodic in each
//! t_j, so the integral is taken by the periodic trapezoidal rule, which
//! converges geometrically once the node count clears the integrand's strip
//! slope; a Richardson pair (P, 2P) gates convergence. Poles are never
//! deformed around: any catalog pole within `min_pole_distance` of the real
//! torus aborts the quadrature.
//!
//! From u the two solution families are assembled by the diagonal D-factors:
//! Ψ_f = (1⊗f)(1⊗D(μ,z,p))u solves the λ-side equations with step p, and
//! Φ_f = (f⊗1)(D(λ,z,τ)⊗1)u solves the μ-side equations with step τ.

use std::collections::HashMap;
use std::sync::{Arc, Mutex};

use num_complex::Complex64 as C64;

use crate::error::{Error, Result};
use crate::linalg::CMat;
use crate::phase::{omega_phase_multi, torus_pole_distance, CatalogCaps, PhaseTruncation};
use crate::pi_i;
use crate::qkzb::{d_diag, d_product, KzbContext, LambdaFn};
use crate::space::{Composition, ModelParams, ZeroWeightSpace};
use crate::theta::TruncationPolicy;
use crate::two_pi_i;
use crate::weight::{omega_basis, ModulusSelect, WeightEnv};

/// A scalar theta function of level N with modulus τ:
/// f(y) = Σ_{j∈ℤ} exp(πiN(j²τ + 2jy)), satisfying f(y+1) = f(y) and
/// f(y+τ) = e^{−πiN(2y+τ)} f(y).
pub fn scalar_theta_level(y: C64, level: u32, tau: C64, pol: &TruncationPolicy) -> Result<C64> {
    let nf = level as f64;
    let mut sum = C64::new(1.0, 0.0); // j = 0 term
    let mut scale = 1.0_f64;
    for j in 1..=pol.max_terms {
        let jf = j as f64;
        let quad = pi_i() * nf * jf * jf * tau;
        let plus = (quad + two_pi_i() * nf * jf * y).exp();
        let minus = (quad - two_pi_i() * nf * jf * y).exp();
        sum += plus + minus;
        scale = scale.max(plus.norm()).max(minus.norm());
        let b = jf + 1.0;
        let tail = (-std::f64::consts::PI * nf * b * b * tau.im
            + 2.0 * std::f64::consts::PI * nf * b * y.im.abs())
        .exp();
        if tail < pol.target_rel_err * scale.max(sum.norm()).max(f64::MIN_POSITIVE) {
            return Ok(sum);
        }
    }
    Err(Error::Truncation {
        context: "scalar_theta_level",
        bound: f64::NAN,
        target: pol.target_rel_err,
    })
}

/// Which entire function ξ multiplies the integrand.
#[derive(Debug, Clone, PartialEq)]
pub enum XiKind {
    /// ξ ≡ 1 (4ηN-periodic for every N).
    One,
    /// ξ(x) = f(x/p) with f a scalar theta function of level N and modulus τ;
    /// requires −p/4η = N for 4ηN-periodicity.
    ThetaLevel { level: u32 },
}

/// ξ together with an argument shift: `eval(x)` computes the base kind at
/// x − shift. The shifted variants ξ_j(x) = ξ(x − 2ηΛ_j) appear in the
/// monodromy of z_j → z_j + 1.
#[derive(Debug, Clone, PartialEq)]
pub struct Xi {
    pub kind: XiKind,
    pub shift: C64,
}

impl Xi {
    pub fn one() -> Self {
        Xi {
            kind: XiKind::One,
            shift: C64::new(0.0, 0.0),
        }
    }

    pub fn theta_level(level: u32) -> Self {
        Xi {
            kind: XiKind::ThetaLevel { level },
            shift: C64::new(0.0, 0.0),
        }
    }

    /// ξ(· − delta) relative to this function.
    pub fn shifted(&self, delta: C64) -> Self {
        Xi {
            kind: self.kind.clone(),
            shift: self.shift + delta,
        }
    }

    pub fn eval(&self, x: C64, params: &ModelParams) -> Result<C64> {
        match self.kind {
            XiKind::One => Ok(C64::new(1.0, 0.0)),
            XiKind::ThetaLevel { level } => {
                scalar_theta_level((x - self.shift) / params.p, level, params.tau, &params.trunc)
            }
        }
    }
}

/// Node counts and safety gates for the torus quadrature.
#[derive(Debug, Clone, Copy)]
pub struct QuadratureSpec {
    pub points_per_dim: usize,
    /// Torus size N of [0,N]^m.
    pub n_torus: usize,
    /// Abort when a catalog pole is closer than this to the real torus.
    pub min_pole_distance: f64,
    /// Evaluate at doubled density and require agreement.
    pub richardson: bool,
    /// Relative agreement required from the Richardson pair.
    pub rel_tol: f64,
}

impl Default for QuadratureSpec {
    fn default() -> Self {
        QuadratureSpec {
            points_per_dim: 256,
            n_torus: 1,
            min_pole_distance: 0.025,
            richardson: true,
            rel_tol: 1e-7,
        }
    }
}

/// The u tensor at one (z, λ, μ): entries indexed (row L, column M).
#[derive(Debug, Clone)]
pub struct SolutionTensor {
    pub space: Arc<ZeroWeightSpace>,
    pub lambda: C64,
    pub mu: C64,
    pub z: Vec<C64>,
    pub entries: CMat,
}

/// Fixed-topology pairwise reduction; bit-stable regardless of chunking.
fn tree_sum(values: &mut Vec<C64>) -> C64 {
    if values.is_empty() {
        return C64::new(0.0, 0.0);
    }
    while values.len() > 1 {
        let mut next = Vec::with_capacity(values.len().div_ceil(2));
        for pair in values.chunks(2) {
            next.push(if pair.len() == 2 {
                pair[0] + pair[1]
            } else {
                pair[0]
            });
        }
        *values = next;
    }
    values[0]
}

/// Everything one solution family needs: parameters, ξ, quadrature policy and
/// a cache of computed u tensors.
pub struct HyperContext {
    pub params: ModelParams,
    pub xi: Xi,
    pub quad: QuadratureSpec,
    pub phase_trunc: PhaseTruncation,
    pub space: Arc<ZeroWeightSpace>,
    env_tau: WeightEnv,
    env_p: WeightEnv,
    cache: Mutex<HashMap<UKey, Arc<CMat>>>,
    /// Ω(t,z) node values per (z, grid) — independent of λ, μ, ξ, so every
    /// sample evaluation at the same z reuses them.
    omega_cache: Mutex<HashMap<(Vec<(u64, u64)>, usize), Arc<Vec<C64>>>>,
}

type UKey = (u64, u64, u64, u64, Vec<(u64, u64)>);

fn bits(c: C64) -> (u64, u64) {
    (c.re.to_bits(), c.im.to_bits())
}

impl HyperContext {
    pub fn new(params: &ModelParams, xi: Xi, quad: QuadratureSpec) -> Arc<Self> {
        // the integrand is evaluated on the real torus and at β-shifted
        // points up to |Im(p+τ)|; size the double product accordingly
        let mut im_bound = params.a_vec().iter().map(|a| a.im.abs()).fold(0.0, f64::max)
            + 2.0 * (params.tau.im + params.p.im);
        if params.m >= 2 {
            im_bound += 2.0 * params.eta.im.abs();
        }
        let phase_trunc = PhaseTruncation::auto(
            params.p,
            params.tau,
            im_bound,
            params.trunc.target_rel_err.max(1e-13),
        );
        Arc::new(HyperContext {
            params: params.clone(),
            xi,
            quad,
            phase_trunc,
            space: params.zero_weight_space(),
            env_tau: WeightEnv::from_params(params, ModulusSelect::Tau),
            env_p: WeightEnv::from_params(params, ModulusSelect::P),
            cache: Mutex::new(HashMap::new()),
            omega_cache: Mutex::new(HashMap::new()),
        })
    }

    /// The quadrature grid of the fine level, in evaluation order.
    fn grid(&self, fine: usize) -> Vec<Vec<usize>> {
        match self.params.m {
            1 => (0..fine).map(|i| vec![i]).collect(),
            _ => (0..fine)
                .flat_map(|i| (0..fine).map(move |j| vec![i, j]))
                .collect(),
        }
    }

    /// Ω(t,z) at every grid node, cached per (z, grid size).
    fn omega_nodes(&self, z: &[C64], fine: usize) -> Result<Arc<Vec<C64>>> {
        let key = (z.iter().map(|&c| bits(c)).collect::<Vec<_>>(), fine);
        if let Some(hit) = self.omega_cache.lock().unwrap().get(&key) {
            return Ok(hit.clone());
        }
        let params = &self.params;
        let a = params.a_vec();
        let nt = self.quad.n_torus as f64;
        let mut values = Vec::new();
        for idx in self.grid(fine) {
            let t: Vec<C64> = idx
                .iter()
                .map(|&i| C64::new(nt * i as f64 / fine as f64, 0.0))
                .collect();
            values.push(omega_phase_multi(
                &t,
                z,
                &a,
                params.eta,
                params.tau,
                params.p,
                &self.phase_trunc,
            )?);
        }
        let arc = Arc::new(values);
        self.omega_cache.lock().unwrap().insert(key, arc.clone());
        Ok(arc)
    }

    /// Same context with another ξ (the cache is not shared).
    pub fn with_xi(&self, xi: Xi) -> Arc<Self> {
        HyperContext::new(&self.params, xi, self.quad)
    }

    /// The full u tensor at (λ, μ, z), cached by bit pattern.
    pub fn u_matrix(&self, lambda: C64, mu: C64, z: &[C64]) -> Result<Arc<CMat>> {
        let key: UKey = (
            lambda.re.to_bits(),
            lambda.im.to_bits(),
            mu.re.to_bits(),
            mu.im.to_bits(),
            z.iter().map(|&c| bits(c)).collect(),
        );
        if let Some(hit) = self.cache.lock().unwrap().get(&key) {
            return Ok(hit.clone());
        }
        let mat = Arc::new(self.u_matrix_uncached(lambda, mu, z)?);
        self.cache.lock().unwrap().insert(key, mat.clone());
        Ok(mat)
    }

    pub fn solution_tensor(&self, lambda: C64, mu: C64, z: &[C64]) -> Result<SolutionTensor> {
        Ok(SolutionTensor {
            space: self.space.clone(),
            lambda,
            mu,
            z: z.to_vec(),
            entries: (*self.u_matrix(lambda, mu, z)?).clone(),
        })
    }

    /// A single coordinate u_{LM}.
    pub fn u_coord(
        &self,
        el: &Composition,
        em: &Composition,
        lambda: C64,
        mu: C64,
        z: &[C64],
    ) -> Result<C64> {
        let mat = self.u_matrix(lambda, mu, z)?;
        Ok(mat[(self.space.idx(el), self.space.idx(em))])
    }

    fn u_matrix_uncached(&self, lambda: C64, mu: C64, z: &[C64]) -> Result<CMat> {
        let params = &self.params;
        let m = params.m;
        if m > 2 {
            return Err(Error::InvalidParameter(
                "torus quadrature supports m ≤ 2".into(),
            ));
        }
        let dim = self.space.dim();
        let prefactor = (-pi_i() * mu * lambda / (2.0 * params.eta)).exp();
        let a = params.a_vec();
        let az: C64 = a.iter().zip(z).map(|(ai, zi)| 2.0 * ai * zi).sum();
        let xi_base = params.p * lambda + params.tau * mu - az;

        if m == 0 {
            // zero-dimensional torus: the empty integral is the ξ·prefactor
            let mut entries = CMat::zeros(dim);
            entries[(0, 0)] = prefactor * self.xi.eval(xi_base, params)?;
            return Ok(entries);
        }
        let dist = torus_pole_distance(params, z, &CatalogCaps::default());
        if dist < self.quad.min_pole_distance {
            return Err(Error::PoleTooClose {
                distance: dist,
                required: self.quad.min_pole_distance,
            });
        }

        let nt = self.quad.n_torus as f64;
        let fine = 2 * self.quad.points_per_dim;
        let omegas = self.omega_nodes(z, fine)?;

        // per-entry node contributions on the fine grid; the coarse value
        // reuses the even-indexed nodes
        let nodes = self.grid(fine);
        let mut per_entry_fine: Vec<Vec<C64>> = vec![Vec::with_capacity(nodes.len()); dim * dim];
        let mut per_entry_coarse: Vec<Vec<C64>> = vec![Vec::new(); dim * dim];
        for (node_idx, idx) in nodes.iter().enumerate() {
            let t: Vec<C64> = idx
                .iter()
                .map(|&i| C64::new(nt * i as f64 / fine as f64, 0.0))
                .collect();
            let sum_t: C64 = t.iter().sum();
            let shared =
                self.xi.eval(xi_base + 4.0 * params.eta * sum_t, params)? * omegas[node_idx];
            let wl: Vec<C64> = self
                .space
                .comps()
                .iter()
                .map(|c| omega_basis(c, &t, lambda, z, &self.env_tau))
                .collect::<Result<_>>()?;
            let wm: Vec<C64> = self
                .space
                .comps()
                .iter()
                .map(|c| omega_basis(c, &t, mu, z, &self.env_p))
                .collect::<Result<_>>()?;
            let coarse = idx.iter().all(|i| i % 2 == 0);
            for li in 0..dim {
                for mi in 0..dim {
                    let v = shared * wl[li] * wm[mi];
                    per_entry_fine[li * dim + mi].push(v);
                    if coarse {
                        per_entry_coarse[li * dim + mi].push(v);
                    }
                }
            }
        }
        let h_fine = (nt / fine as f64).powi(m as i32);
        let h_coarse = (nt / self.quad.points_per_dim as f64).powi(m as i32);
        let mut fine_mat = CMat::zeros(dim);
        let mut coarse_mat = CMat::zeros(dim);
        for li in 0..dim {
            for mi in 0..dim {
                fine_mat[(li, mi)] =
                    prefactor * h_fine * tree_sum(&mut per_entry_fine[li * dim + mi]);
                coarse_mat[(li, mi)] =
                    prefactor * h_coarse * tree_sum(&mut per_entry_coarse[li * dim + mi]);
            }
        }
        if self.quad.richardson {
            let diff = fine_mat.max_abs_diff(&coarse_mat);
            let scale = fine_mat.max_abs().max(f64::MIN_POSITIVE);
            if diff > self.quad.rel_tol * scale {
                return Err(Error::NonConvergent {
                    diff: diff / scale,
                    tol: self.quad.rel_tol,
                });
            }
        }
        Ok(fine_mat)
    }

    /// For fixed μ, the M-column of u as a λ-function.
    pub fn u_column_fn(self: &Arc<Self>, m_idx: usize, mu: C64, z: &[C64]) -> LambdaFn {
        let ctx = self.clone();
        let z = z.to_vec();
        LambdaFn::new(self.space.clone(), move |lambda| {
            let mat = ctx.u_matrix(lambda, mu, &z)?;
            Ok((0..ctx.space.dim()).map(|l| mat[(l, m_idx)]).collect())
        })
    }

    /// For fixed λ, the L-row of u as a μ-function.
    pub fn u_row_fn(self: &Arc<Self>, l_idx: usize, lambda: C64, z: &[C64]) -> LambdaFn {
        let ctx = self.clone();
        let z = z.to_vec();
        LambdaFn::new(self.space.clone(), move |mu| {
            let mat = ctx.u_matrix(lambda, mu, &z)?;
            Ok((0..ctx.space.dim()).map(|m| mat[(l_idx, m)]).collect())
        })
    }

    /// Ψ_f^ξ(λ) = (1⊗f)(1⊗D(μ,z,p)) u(z,λ,μ): contract the M-slot with the
    /// linear functional f after the diagonal D-factor.
    pub fn psi_solution(self: &Arc<Self>, f: Vec<C64>, mu: C64, z: &[C64]) -> LambdaFn {
        let ctx = self.clone();
        let z_own = z.to_vec();
        let dprod = d_product(&self.params, &self.space, mu, z, self.params.p);
        LambdaFn::new(self.space.clone(), move |lambda| {
            let mat = ctx.u_matrix(lambda, mu, &z_own)?;
            let dim = ctx.space.dim();
            Ok((0..dim)
                .map(|l| {
                    (0..dim)
                        .map(|m| mat[(l, m)] * dprod.diag[m] * f[m])
                        .sum::<C64>()
                })
                .collect())
        })
    }

    /// Φ_f^ξ(μ) = (f⊗1)(D(λ,z,τ)⊗1) u(z,λ,μ): contract the L-slot.
    pub fn phi_solution(self: &Arc<Self>, f: Vec<C64>, lambda: C64, z: &[C64]) -> LambdaFn {
        let ctx = self.clone();
        let z_own = z.to_vec();
        let dprod = d_product(&self.params, &self.space, lambda, z, self.params.tau);
        LambdaFn::new(self.space.clone(), move |mu| {
            let mat = ctx.u_matrix(lambda, mu, &z_own)?;
            let dim = ctx.space.dim();
            Ok((0..dim)
                .map(|m| {
                    (0..dim)
                        .map(|l| f[l] * dprod.diag[l] * mat[(l, m)])
                        .sum::<C64>()
                })
                .collect())
        })
    }
}

/// The raw integrand of u_{LM} at one point t (prefactor included); exposed
/// for the symmetry and periodicity checks.
pub fn integrand_ilm(
    el: &Composition,
    em: &Composition,
    t: &[C64],
    lambda: C64,
    mu: C64,
    z: &[C64],
    params: &ModelParams,
    xi: &Xi,
    phase_trunc: &PhaseTruncation,
) -> Result<C64> {
    let a = params.a_vec();
    let az: C64 = a.iter().zip(z).map(|(ai, zi)| 2.0 * ai * zi).sum();
    let sum_t: C64 = t.iter().sum();
    let env_tau = WeightEnv::from_params(params, ModulusSelect::Tau);
    let env_p = WeightEnv::from_params(params, ModulusSelect::P);
    Ok((-pi_i() * mu * lambda / (2.0 * params.eta)).exp()
        * xi.eval(
            params.p * lambda + params.tau * mu - az + 4.0 * params.eta * sum_t,
            params,
        )?
        * omega_phase_multi(t, z, &a, params.eta, params.tau, params.p, phase_trunc)?
        * omega_basis(el, t, lambda, z, &env_tau)?
        * omega_basis(em, t, mu, z, &env_p)?)
}

/// u computed by integrating the integrand at t + β; equal to the straight
/// integral for β ∈ τℤ^m + pℤ^m in the starting range.
pub fn u_matrix_shifted(ctx: &HyperContext, lambda: C64, mu: C64, z: &[C64], beta: C64) -> Result<CMat> {
    let params = &ctx.params;
    let m = params.m;
    if m != 1 {
        return Err(Error::InvalidParameter(
            "the β-shift comparison is implemented for m = 1".into(),
        ));
    }
    let dim = ctx.space.dim();
    let fine = 2 * ctx.quad.points_per_dim;
    let nt = ctx.quad.n_torus as f64;
    let mut per_entry: Vec<Vec<C64>> = vec![Vec::with_capacity(fine); dim * dim];
    for i in 0..fine {
        let t = [C64::new(nt * i as f64 / fine as f64, 0.0) + beta];
        for li in 0..dim {
            for mi in 0..dim {
                let v = integrand_ilm(
                    &ctx.space.comps()[li],
                    &ctx.space.comps()[mi],
                    &t,
                    lambda,
                    mu,
                    z,
                    params,
                    &ctx.xi,
                    &ctx.phase_trunc,
                )?;
                per_entry[li * dim + mi].push(v);
            }
        }
    }
    let h = nt / fine as f64;
    let mut out = CMat::zeros(dim);
    for li in 0..dim {
        for mi in 0..dim {
            out[(li, mi)] = h * tree_sum(&mut per_entry[li * dim + mi]);
        }
    }
    Ok(out)
}

/// Which shift of z_j a solution check exercises.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ShiftDirection {
    /// z_j → z_j + p against K_j ⊗ D_j^{-1}(μ).
    StepP,
    /// z_j → z_j + τ against D_j^{-1}(λ) ⊗ K_j(μ-side).
    StepTau,
    /// z_j → z_j + 1, plain equality (needs 2a_l-periodic ξ; ξ ≡ 1 works).
    StepOne,
}

/// Verify the difference equations of the u tensor in one direction; returns
/// the maximum entrywise relative deviation over the sample pairs.
pub fn verify_qkzb_solution(
    ctx: &Arc<HyperContext>,
    direction: ShiftDirection,
    j: usize,
    lambdas: &[C64],
    mus: &[C64],
    z: &[C64],
) -> Result<f64> {
    let params = &ctx.params;
    let dim = ctx.space.dim();
    let mut worst: f64 = 0.0;
    for (&lambda, &mu) in lambdas.iter().zip(mus) {
        let (lhs, rhs): (CMat, CMat) = match direction {
            ShiftDirection::StepOne => {
                let mut z1 = z.to_vec();
                z1[j - 1] += 1.0;
                let lhs = (*ctx.u_matrix(lambda, mu, &z1)?).clone();
                let rhs = (*ctx.u_matrix(lambda, mu, z)?).clone();
                (lhs, rhs)
            }
            ShiftDirection::StepP => {
                let mut zp = z.to_vec();
                zp[j - 1] += params.p;
                let lhs = (*ctx.u_matrix(lambda, mu, &zp)?).clone();
                // K_j acts on the λ-slot of each M-column, D_j^{-1}(μ) scales
                // the column by its diagonal entry at M
                let kctx = KzbContext::primal(params);
                let dj = d_diag(params, &ctx.space, j, mu);
                let mut rhs = CMat::zeros(dim);
                for m_idx in 0..dim {
                    let col = ctx.u_column_fn(m_idx, mu, z);
                    let applied = kctx.apply_k(j, z, &col);
                    let v = applied.eval(lambda)?;
                    for l_idx in 0..dim {
                        rhs[(l_idx, m_idx)] = v[l_idx] * dj[m_idx].finv();
                    }
                }
                (lhs, rhs)
            }
            ShiftDirection::StepTau => {
                let mut zt = z.to_vec();
                zt[j - 1] += params.tau;
                let lhs = (*ctx.u_matrix(lambda, mu, &zt)?).clone();
                // dual operator in μ on each L-row, D_j^{-1}(λ) on the row
                let kctx = KzbContext::dual(params);
                let dj = d_diag(params, &ctx.space, j, lambda);
                let mut rhs = CMat::zeros(dim);
                for l_idx in 0..dim {
                    let row = ctx.u_row_fn(l_idx, lambda, z);
                    let applied = kctx.apply_k(j, z, &row);
                    let v = applied.eval(mu)?;
                    for m_idx in 0..dim {
                        rhs[(l_idx, m_idx)] = dj[l_idx].finv() * v[m_idx];
                    }
                }
                (lhs, rhs)
            }
        };
        let scale = lhs.max_abs().max(rhs.max_abs()).max(f64::MIN_POSITIVE);
        worst = worst.max(lhs.max_abs_diff(&rhs) / scale);
    }
    Ok(worst)
}

/// The (theta2) multiplier of the hypergeometric solutions under λ → λ+τ at
/// component L:
///
/// ```text
/// (−1)^m · exp(−πi[2·level·λ + level·τ
///               + Σ_j h^{(j)}(z_j − a_j − 2a_{j+1} − … − 2a_n)]).
/// ```
///
/// The parity factor comes from the odd θ-multiplier: each of the m
/// λ-numerators of ω_L contributes −e^{−2πi(·)−πiτ} under λ → λ+τ, and the
/// signs do not cancel for odd m (confirmed numerically to machine precision).
pub fn theta2_multiplier(
    params: &ModelParams,
    comp: &Composition,
    level: f64,
    lambda: C64,
    z: &[C64],
) -> C64 {
    let a = params.a_vec();
    let n = params.n();
    let mut hsum = C64::new(0.0, 0.0);
    for jj in 0..n {
        let h = params.h_weight(comp, jj);
        let mut c = z[jj] - a[jj];
        for l in jj + 1..n {
            c -= 2.0 * a[l];
        }
        hsum += h * c;
    }
    let parity = if params.m % 2 == 0 { 1.0 } else { -1.0 };
    parity * (-pi_i() * (2.0 * level * lambda + level * params.tau + hsum)).exp()
}

/// Residuals of the two theta-function properties of Ψ = ψ_solution(f, μ, z):
/// (theta1) Ψ(λ+1) = Ψ(λ), and (theta2) with the level-(m+N) multiplier.
/// The context must carry a ThetaLevel ξ with −p/4η = N.
pub fn theta_property_check(
    ctx: &Arc<HyperContext>,
    z: &[C64],
    f: Vec<C64>,
    mu: C64,
    lambdas: &[C64],
) -> Result<(f64, f64)> {
    let params = &ctx.params;
    let XiKind::ThetaLevel { level } = ctx.xi.kind else {
        return Err(Error::InvalidParameter(
            "theta_property_check needs a theta-level ξ".into(),
        ));
    };
    let ratio = -params.p / (4.0 * params.eta);
    if (ratio - level as f64).norm() > 1e-9 {
        return Err(Error::InvalidParameter(format!(
            "theta-level ξ requires −p/4η = N; got {ratio} vs N = {level}"
        )));
    }
    let total_level = params.m as f64 + level as f64;
    let psi = ctx.psi_solution(f, mu, z);
    let mut r1: f64 = 0.0;
    let mut r2: f64 = 0.0;
    for &lambda in lambdas {
        let v0 = psi.eval(lambda)?;
        let scale = v0.iter().map(|x| x.norm()).fold(f64::MIN_POSITIVE, f64::max);
        let v1 = psi.eval(lambda + 1.0)?;
        for (a, b) in v1.iter().zip(&v0) {
            r1 = r1.max((a - b).norm() / scale);
        }
        let vt = psi.eval(lambda + params.tau)?;
        let scale_t = vt
            .iter()
            .chain(&v0)
            .map(|x| x.norm())
            .fold(f64::MIN_POSITIVE, f64::max);
        for (idx, comp) in ctx.space.comps().iter().enumerate() {
            let mult = theta2_multiplier(params, comp, total_level, lambda, z);
            r2 = r2.max((vt[idx] - mult * v0[idx]).norm() / scale_t);
        }
    }
    Ok((r1, r2))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::presets;

    fn starting_ctx() -> Arc<HyperContext> {
        HyperContext::new(
            &presets::starting_range_n2(),
            Xi::one(),
            QuadratureSpec::default(),
        )
    }

    fn theta_ctx() -> Arc<HyperContext> {
        let mut quad = QuadratureSpec::default();
        quad.points_per_dim = 64;
        HyperContext::new(&presets::theta_level_n2(), Xi::theta_level(1), quad)
    }

    #[test]
    fn scalar_theta_level_properties() {
        let tau = C64::new(0.0351, 0.46);
        let pol = TruncationPolicy::default();
        for level in [1u32, 2] {
            let y = C64::new(0.23, 0.17);
            let f0 = scalar_theta_level(y, level, tau, &pol).unwrap();
            let f1 = scalar_theta_level(y + 1.0, level, tau, &pol).unwrap();
            assert!((f1 - f0).norm() < 1e-12 * f0.norm());
            let ft = scalar_theta_level(y + tau, level, tau, &pol).unwrap();
            let mult = (-pi_i() * level as f64 * (2.0 * y + tau)).exp();
            assert!((ft - mult * f0).norm() < 1e-11 * ft.norm().max(f0.norm()));
        }
    }

    #[test]
    fn integrand_definition_is_product_of_factors() {
        let params = presets::starting_range_n2();
        let z = presets::starting_range_z();
        let xi = Xi::one();
        let trunc = PhaseTruncation::auto(params.p, params.tau, 0.5, 1e-13);
        let t = [C64::new(0.37, 0.0)];
        let lambda = C64::new(0.2731, 0.0141);
        let mu = C64::new(-0.1321, 0.0212);
        let l = Composition(vec![0, 1]);
        let m = Composition(vec![1, 0]);
        let whole =
            integrand_ilm(&l, &m, &t, lambda, mu, &z, &params, &xi, &trunc).unwrap();
        // recompute factor by factor
        let a = params.a_vec();
        let env_tau = WeightEnv::from_params(&params, ModulusSelect::Tau);
        let env_p = WeightEnv::from_params(&params, ModulusSelect::P);
        let pref = (-pi_i() * mu * lambda / (2.0 * params.eta)).exp();
        let om = omega_phase_multi(&t, &z, &a, params.eta, params.tau, params.p, &trunc).unwrap();
        let wl = omega_basis(&l, &t, lambda, &z, &env_tau).unwrap();
        let wm = omega_basis(&m, &t, mu, &z, &env_p).unwrap();
        let reference = pref * om * wl * wm;
        assert!((whole - reference).norm() < 1e-13 * reference.norm());
    }

    #[test]
    fn integrand_lm_exchange_symmetry() {
        // swapping (τ,λ,L) ↔ (p,μ,M) leaves the raw integrand unchanged
        let params = presets::starting_range_n2();
        let dual = params.dual();
        let z = presets::starting_range_z();
        let xi = Xi::one();
        let trunc = PhaseTruncation::auto(params.p, params.tau, 0.5, 1e-13);
        let lambda = C64::new(0.2731, 0.0141);
        let mu = C64::new(-0.1321, 0.0212);
        let l = Composition(vec![0, 1]);
        let m = Composition(vec![1, 0]);
        for tre in [0.11, 0.43, 0.77] {
            let t = [C64::new(tre, 0.0)];
            let v1 = integrand_ilm(&l, &m, &t, lambda, mu, &z, &params, &xi, &trunc).unwrap();
            let v2 = integrand_ilm(&m, &l, &t, mu, lambda, &z, &dual, &xi, &trunc).unwrap();
            assert!((v1 - v2).norm() < 1e-10 * v1.norm(), "t = {tre}");
        }
    }

    #[test]
    fn integrand_periodic_with_theta_xi() {
        // with a 4ηN-periodic ξ the integrand is N-periodic in t
        let ctx = theta_ctx();
        let params = &ctx.params;
        let z = presets::starting_range_z();
        let lambda = C64::new(0.13, 0.31);
        let mu = 2.0 * params.eta;
        let l = Composition(vec![0, 1]);
        let m = Composition(vec![1, 0]);
        let t = [C64::new(0.29, 0.0)];
        let t1 = [t[0] + 1.0];
        let v0 = integrand_ilm(&l, &m, &t, lambda, mu, &z, params, &ctx.xi, &ctx.phase_trunc)
            .unwrap();
        let v1 = integrand_ilm(&l, &m, &t1, lambda, mu, &z, params, &ctx.xi, &ctx.phase_trunc)
            .unwrap();
        assert!((v1 - v0).norm() < 1e-9 * v0.norm());
    }

    #[test]
    fn two_variable_torus_quadrature() {
        // m = 2 exercises the double grid: the integral converges through the
        // Richardson gate and is exactly invariant under z_j → z_j + 1.
        let params = ModelParams::new(
            C64::new(0.0351, 0.52),
            C64::new(-0.172, 0.84),
            C64::new(0.043, -0.21),
            vec![C64::new(2.0, 0.0), C64::new(2.0, 0.0)],
            2,
            TruncationPolicy::default(),
            crate::space::NumericOptions::default(),
        )
        .unwrap();
        let mut quad = QuadratureSpec::default();
        quad.points_per_dim = 24;
        let ctx = HyperContext::new(&params, Xi::one(), quad);
        let z = presets::starting_range_z();
        assert_eq!(ctx.space.dim(), 3);
        let lambda = C64::new(0.2731, 0.0141);
        let mu = C64::new(-0.1321, 0.0212);
        let base = ctx.u_matrix(lambda, mu, &z).unwrap();
        assert!(base.max_abs().is_finite() && base.max_abs() > 0.0);
        let mut z1 = z.clone();
        z1[1] += 1.0;
        let shifted = ctx.u_matrix(lambda, mu, &z1).unwrap();
        assert!(
            shifted.max_abs_diff(&base) < 1e-9 * base.max_abs(),
            "rel dev {:.3e}",
            shifted.max_abs_diff(&base) / base.max_abs()
        );
    }

    #[test]
    fn phi_solution_solves_dual_equations() {
        // For fixed λ, Φ_f(μ) = (f⊗1)(D(λ,z,τ)⊗1)u solves the μ-side
        // equations with modulus p and step τ: Φ_f(…,z_j+τ,…) = K_j^dual Φ_f.
        let ctx = starting_ctx();
        let params = &ctx.params;
        let z = presets::starting_range_z();
        let lambda = C64::new(0.2731, 0.0141);
        let mu = C64::new(-0.1321, 0.0212);
        let f = vec![C64::new(1.0, 0.0), C64::new(0.7, -0.4)];
        let phi = ctx.phi_solution(f.clone(), lambda, &z);
        let mut z_tau = z.clone();
        z_tau[0] += params.tau;
        let phi_shifted = ctx.phi_solution(f, lambda, &z_tau);
        let kctx = KzbContext::dual(params);
        let applied = kctx.apply_k(1, &z, &phi);
        let lhs = phi_shifted.eval(mu).unwrap();
        let rhs = applied.eval(mu).unwrap();
        let scale = lhs
            .iter()
            .chain(&rhs)
            .map(|x| x.norm())
            .fold(f64::MIN_POSITIVE, f64::max);
        for (a, b) in lhs.iter().zip(&rhs) {
            assert!((a - b).norm() / scale < 1e-4, "{a} vs {b}");
        }
    }

    #[test]
    fn richardson_gate_and_beta_independence() {
        let ctx = starting_ctx();
        let z = presets::starting_range_z();
        let lambda = C64::new(0.2731, 0.0141);
        let mu = C64::new(-0.1321, 0.0212);
        let base = ctx.u_matrix(lambda, mu, &z).unwrap();
        for beta in [ctx.params.p, ctx.params.tau, ctx.params.p + ctx.params.tau] {
            let shifted = u_matrix_shifted(&ctx, lambda, mu, &z, beta).unwrap();
            let scale = base.max_abs();
            assert!(
                shifted.max_abs_diff(&base) < 1e-7 * scale,
                "β = {beta}: dev {:.3e}",
                shifted.max_abs_diff(&base) / scale
            );
        }
    }

    #[test]
    fn pole_gate_refuses_close_poles() {
        let params = presets::starting_range_n2();
        let mut quad = QuadratureSpec::default();
        quad.min_pole_distance = 0.5; // stricter than any regime provides
        let ctx = HyperContext::new(&params, Xi::one(), quad);
        let z = presets::starting_range_z();
        let r = ctx.u_matrix(C64::new(0.27, 0.01), C64::new(-0.13, 0.02), &z);
        assert!(matches!(r, Err(Error::PoleTooClose { .. })));
    }

    #[test]
    fn empty_torus_edge_case() {
        // m = 0: the empty integral is the ξ·prefactor
        let params = ModelParams::new(
            C64::new(0.0312, 0.019),
            C64::new(-0.0217, 0.0185),
            C64::new(0.004, 0.2),
            vec![C64::new(0.0, 0.0)],
            0,
            TruncationPolicy::default(),
            crate::space::NumericOptions::default(),
        )
        .unwrap();
        let ctx = HyperContext::new(&params, Xi::one(), QuadratureSpec::default());
        let lambda = C64::new(0.27, 0.01);
        let mu = C64::new(-0.13, 0.02);
        let z = [C64::new(0.1, 0.0)];
        let mat = ctx.u_matrix(lambda, mu, &z).unwrap();
        let expect = (-pi_i() * mu * lambda / (2.0 * params.eta)).exp();
        assert!((mat[(0, 0)] - expect).norm() < 1e-13 * expect.norm());
    }

    #[test]
    fn tensor_size_counts() {
        let ctx = starting_ctx();
        assert_eq!(ctx.space.dim(), 2);
        let z = presets::starting_range_z();
        let tensor = ctx
            .solution_tensor(C64::new(0.27, 0.01), C64::new(-0.13, 0.02), &z)
            .unwrap();
        assert_eq!(tensor.entries.dim(), 2); // 2×2 = 4 entries = dim V[0]²
    }

    #[test]
    fn coordinate_functional_picks_column() {
        let ctx = starting_ctx();
        let z = presets::starting_range_z();
        let lambda = C64::new(0.2731, 0.0141);
        let mu = C64::new(-0.1321, 0.0212);
        // f = coordinate functional at the second composition
        let psi = ctx.psi_solution(vec![C64::new(0.0, 0.0), C64::new(1.0, 0.0)], mu, &z);
        let v = psi.eval(lambda).unwrap();
        let mat = ctx.u_matrix(lambda, mu, &z).unwrap();
        let d = d_product(&ctx.params, &ctx.space, mu, &z, ctx.params.p);
        for l in 0..2 {
            let expect = mat[(l, 1)] * d.diag[1];
            assert!((v[l] - expect).norm() < 1e-12 * expect.norm());
        }
    }

    #[test]
    fn solution_equation_step_one() {
        let ctx = starting_ctx();
        let z = presets::starting_range_z();
        let lambdas = [C64::new(0.2731, 0.0141), C64::new(-0.1729, 0.0287)];
        let mus = [C64::new(-0.1321, 0.0212), C64::new(0.2217, -0.0193)];
        for j in 1..=2 {
            let r = verify_qkzb_solution(&ctx, ShiftDirection::StepOne, j, &lambdas, &mus, &z)
                .unwrap();
            assert!(r < 1e-5, "eq3 j={j}: residual {r:.3e}");
        }
    }

    #[test]
    fn solution_equation_step_p() {
        let ctx = starting_ctx();
        let z = presets::starting_range_z();
        let lambdas = [C64::new(0.2731, 0.0141)];
        let mus = [C64::new(-0.1321, 0.0212)];
        let r =
            verify_qkzb_solution(&ctx, ShiftDirection::StepP, 1, &lambdas, &mus, &z).unwrap();
        assert!(r < 1e-4, "eq1 residual {r:.3e}");
    }

    #[test]
    fn solution_equation_step_tau() {
        let ctx = starting_ctx();
        let z = presets::starting_range_z();
        let lambdas = [C64::new(0.2731, 0.0141)];
        let mus = [C64::new(-0.1321, 0.0212)];
        let r =
            verify_qkzb_solution(&ctx, ShiftDirection::StepTau, 1, &lambdas, &mus, &z).unwrap();
        assert!(r < 1e-4, "eq2 residual {r:.3e}");
    }

    #[test]
    fn theta_properties_hold() {
        let ctx = theta_ctx();
        let params = &ctx.params;
        let z = presets::starting_range_z();
        let mu = 2.0 * params.eta * (params.m as f64); // s = 0
        let f = vec![C64::new(1.0, 0.0), C64::new(0.7, -0.4)];
        let lambdas = [C64::new(0.13, 0.31), C64::new(-0.21, 0.17)];
        let (r1, r2) = theta_property_check(&ctx, &z, f, mu, &lambdas).unwrap();
        assert!(r1 < 1e-4, "theta1 residual {r1:.3e}");
        assert!(r2 < 1e-4, "theta2 residual {r2:.3e}");
    }

    #[test]
    fn theta_negative_control() {
        let ctx = theta_ctx();
        let params = &ctx.params;
        let z = presets::starting_range_z();
        // μ NOT of the form 2η(m+2s)
        let mu = 2.0 * params.eta * (params.m as f64) + C64::new(0.37, 0.0);
        let f = vec![C64::new(1.0, 0.0), C64::new(0.7, -0.4)];
        let lambdas = [C64::new(0.13, 0.31)];
        let (r1, _) = theta_property_check(&ctx, &z, f, mu, &lambdas).unwrap();
        assert!(r1 > 1e-1, "negative control too small: {r1:.3e}");
    }

    #[test]
    fn constant_xi_lambda_period() {
        // ξ ≡ 1 with μ = 2η(m+2s): Ψ(λ+1) = Ψ(λ) since e^{−πiμ/2η}(−1)^m = 1
        let params = presets::starting_range_n2();
        let ctx = HyperContext::new(&params, Xi::one(), QuadratureSpec::default());
        let z = presets::starting_range_z();
        let mu = 2.0 * params.eta * params.m as f64; // s = 0
        let psi = ctx.psi_solution(vec![C64::new(1.0, 0.0), C64::new(0.5, 0.2)], mu, &z);
        let lam = C64::new(0.2731, 0.0141);
        let v0 = psi.eval(lam).unwrap();
        let v1 = psi.eval(lam + 1.0).unwrap();
        let scale = v0.iter().map(|x| x.norm()).fold(0.0, f64::max);
        for (a, b) in v1.iter().zip(&v0) {
            assert!((a - b).norm() < 1e-6 * scale);
        }
    }
}
