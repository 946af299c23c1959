//! Weight-function bases of the spaces F^m and the tensor map Φ.
//!
//! F̃^m_a(z,λ) is a space of meromorphic functions of t ∈ ℂ^m, 1-periodic in
//! each t_j and with multiplier e^{−2πi(λ+4ηj−2η)} under t_j → t_j+τ. The
//! symmetric group acts by the twisted rule
//!
//! ```text
//! s_j f(t) = f(…,t_{j+1},t_j,…) · θ(t_j−t_{j+1}−2η)/θ(t_j−t_{j+1}+2η),
//! ```
//!
//! and F^m is the invariant subspace. For one factor the space is spanned by
//!
//! ```text
//! ω_m(t,λ;z) = Π_{i<j} θ(t_i−t_j)/θ(t_i−t_j+2η)
//!              · Π_j θ(λ+2ηm+t_j−z−a)/θ(t_j−z−a),
//! ```
//!
//! and for n factors the basis ω_M indexed by compositions M is the explicit
//! subset sum implemented in [`omega_basis`]. The tensor map Φ glues bases of
//! subsystems into bases of the full system and is associative.

use num_complex::Complex64 as C64;

use crate::error::{Error, Result};
use crate::space::{Composition, ModelParams};
use crate::theta::{lattice_distance, theta, EllipticModulus, TruncationPolicy};
use crate::two_pi_i;

/// Which modulus a weight-function evaluation uses: the λ-side modulus τ or
/// the dual μ-side modulus p.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ModulusSelect {
    Tau,
    P,
}

/// Everything a weight-function evaluation needs: the factor weights a_k, the
/// modulus, and the numeric policy.
#[derive(Debug, Clone)]
pub struct WeightEnv {
    pub eta: C64,
    pub a: Vec<C64>,
    pub modulus: EllipticModulus,
    pub trunc: TruncationPolicy,
    pub pole_margin: f64,
    pub comb_cap: usize,
}

impl WeightEnv {
    pub fn new(
        eta: C64,
        a: Vec<C64>,
        modulus: EllipticModulus,
        trunc: TruncationPolicy,
        pole_margin: f64,
        comb_cap: usize,
    ) -> Self {
        WeightEnv {
            eta,
            a,
            modulus,
            trunc,
            pole_margin,
            comb_cap,
        }
    }

    pub fn from_params(params: &ModelParams, select: ModulusSelect) -> Self {
        let modulus = match select {
            ModulusSelect::Tau => *params.modulus_tau(),
            ModulusSelect::P => *params.modulus_p(),
        };
        WeightEnv {
            eta: params.eta,
            a: params.a_vec(),
            modulus,
            trunc: params.trunc,
            pole_margin: params.opts.pole_margin,
            comb_cap: params.opts.comb_cap,
        }
    }

    /// A two-factor system with weights (Λ, M), as used for R-matrix
    /// extraction.
    pub fn two_factor(
        eta: C64,
        weight_a: C64,
        weight_b: C64,
        modulus: EllipticModulus,
        trunc: TruncationPolicy,
        pole_margin: f64,
    ) -> Self {
        WeightEnv {
            eta,
            a: vec![eta * weight_a, eta * weight_b],
            modulus,
            trunc,
            pole_margin,
            comb_cap: 1_000_000,
        }
    }

    /// Λ_k = a_k/η.
    pub fn weight(&self, k: usize) -> C64 {
        self.a[k] / self.eta
    }

    pub(crate) fn th(&self, x: C64) -> Result<C64> {
        theta(x, &self.modulus, &self.trunc)
    }

    /// θ(x) for a denominator: errors out when x is within `pole_margin` of
    /// the period lattice.
    pub(crate) fn th_den(&self, x: C64, context: &'static str) -> Result<C64> {
        let d = lattice_distance(x, self.modulus.tau());
        if d < self.pole_margin {
            return Err(Error::PoleHit {
                context,
                distance: d,
                margin: self.pole_margin,
            });
        }
        theta(x, &self.modulus, &self.trunc)
    }

    /// Subsystem env keeping factors `range` of the weight list.
    pub fn sub(&self, range: std::ops::Range<usize>) -> WeightEnv {
        WeightEnv {
            a: self.a[range].to_vec(),
            ..self.clone()
        }
    }
}

/// A t-evaluator. Weight functions, phase factors and Φ-images are all passed
/// around in this form.
pub type Evaluator = Box<dyn Fn(&[C64]) -> Result<C64>>;

/// u(t) = Π_{i<j} θ(t_i−t_j+2η)/θ(t_i−t_j), the symmetrizing prefactor of the
/// weight-function basis.
pub fn u_factor(t: &[C64], env: &WeightEnv) -> Result<C64> {
    let two_eta = 2.0 * env.eta;
    let mut u = C64::new(1.0, 0.0);
    for i in 0..t.len() {
        for j in i + 1..t.len() {
            let d = t[i] - t[j];
            u *= env.th(d + two_eta)? / env.th_den(d, "u_factor")?;
        }
    }
    Ok(u)
}

/// The one-factor basis function ω_m(t₁..t_m, λ; z) of F^m_a(z,λ).
pub fn omega_one(
    mcount: usize,
    t: &[C64],
    lambda: C64,
    z: C64,
    a: C64,
    env: &WeightEnv,
) -> Result<C64> {
    assert_eq!(t.len(), mcount, "omega_one needs len(t) = mcount");
    let two_eta = 2.0 * env.eta;
    let mut v = C64::new(1.0, 0.0);
    for i in 0..mcount {
        for j in i + 1..mcount {
            let d = t[i] - t[j];
            v *= env.th(d)? / env.th_den(d + two_eta, "omega_one")?;
        }
    }
    let shift = lambda + env.eta * 2.0 * mcount as f64;
    for &tj in t {
        v *= env.th(shift + tj - z - a)? / env.th_den(tj - z - a, "omega_one")?;
    }
    Ok(v)
}

/// Number of ordered disjoint subset tuples (I₁,…,Iₙ) with |I_l| = m_l, i.e.
/// the multinomial m!/(Πm_l!).
fn multinomial(comp: &Composition) -> usize {
    let mut result = 1usize;
    let mut seen = 0usize;
    for &part in comp.parts() {
        for j in 1..=part {
            seen += 1;
            result = result * seen / j;
        }
    }
    result
}

/// The weight-function basis element ω_M(t₁..t_m, λ; z) of F^m.
///
/// Evaluates the subset sum
///
/// ```text
/// u(t)^{-1} Σ_{I₁..Iₙ} Π_l Π_{i∈I_l} Π_{k<l} θ(t_i−z_k+a_k)/θ(t_i−z_k−a_k)
///   · Π_{k<l} Π_{i∈I_k, j∈I_l} θ(t_i−t_j+2η)/θ(t_i−t_j)
///   · Π_k Π_{j∈I_k} θ(λ+t_j−z_k−a_k+2ηm_k−2ηΣ_{l<k}(Λ_l−2m_l)) / θ(t_j−z_k−a_k)
/// ```
///
/// exactly, with all θ-values for the (t_i, z_k) and (t_i, t_j) pairs computed
/// once and shared across the multinomial terms.
pub fn omega_basis(
    mcomp: &Composition,
    t: &[C64],
    lambda: C64,
    z: &[C64],
    env: &WeightEnv,
) -> Result<C64> {
    let n = env.a.len();
    let m = t.len();
    assert_eq!(mcomp.n(), n, "composition length must match factor count");
    assert_eq!(mcomp.total(), m, "|M| must equal len(t)");
    assert_eq!(z.len(), n, "need one point per factor");

    let terms = multinomial(mcomp);
    if terms > env.comb_cap {
        return Err(Error::CombinatorialOverflow {
            terms,
            cap: env.comb_cap,
        });
    }
    if m == 0 {
        return Ok(C64::new(1.0, 0.0));
    }

    let two_eta = 2.0 * env.eta;
    // c_k = Σ_{l<k} (Λ_l − 2 m_l)
    let mut c = vec![C64::new(0.0, 0.0); n];
    for k in 1..n {
        c[k] = c[k - 1] + env.weight(k - 1) - 2.0 * mcomp.parts()[k - 1] as f64;
    }

    // Per-(i,k) caches: the prefix ratio θ(t_i−z_k+a_k)/θ(t_i−z_k−a_k) and the
    // λ-ratio θ(λ+t_i−z_k−a_k+2ηm_k−2ηc_k)/θ(t_i−z_k−a_k).
    let mut prefix_ratio = vec![vec![C64::new(0.0, 0.0); n]; m];
    let mut lambda_ratio = vec![vec![C64::new(0.0, 0.0); n]; m];
    for i in 0..m {
        for k in 0..n {
            let base = t[i] - z[k] - env.a[k];
            let den = env.th_den(base, "omega_basis")?;
            prefix_ratio[i][k] = env.th(t[i] - z[k] + env.a[k])? / den;
            let num =
                env.th(lambda + base + two_eta * (mcomp.parts()[k] as f64) - two_eta * c[k])?;
            lambda_ratio[i][k] = num / den;
        }
    }
    // Ordered-pair cache θ(t_i−t_j+2η)/θ(t_i−t_j), i ≠ j.
    let mut pair_ratio = vec![vec![C64::new(0.0, 0.0); m]; m];
    for i in 0..m {
        for j in 0..m {
            if i != j {
                let d = t[i] - t[j];
                pair_ratio[i][j] = env.th(d + two_eta)? / env.th_den(d, "omega_basis")?;
            }
        }
    }
    let mut u_inv = C64::new(1.0, 0.0);
    for i in 0..m {
        for j in i + 1..m {
            let d = t[i] - t[j];
            u_inv *= env.th(d)? / env.th_den(d + two_eta, "omega_basis")?;
        }
    }

    // Enumerate assignments of indices to subsets with the prescribed counts.
    let mut remaining: Vec<usize> = mcomp.parts().to_vec();
    let mut which = vec![0usize; m];
    let mut sum = C64::new(0.0, 0.0);
    fn rec(
        i: usize,
        m: usize,
        n: usize,
        remaining: &mut [usize],
        which: &mut [usize],
        sum: &mut C64,
        prefix_ratio: &[Vec<C64>],
        lambda_ratio: &[Vec<C64>],
        pair_ratio: &[Vec<C64>],
    ) {
        if i == m {
            let mut term = C64::new(1.0, 0.0);
            for x in 0..m {
                let l = which[x];
                for k in 0..l {
                    term *= prefix_ratio[x][k];
                }
                term *= lambda_ratio[x][l];
            }
            for x in 0..m {
                for y in 0..m {
                    if which[x] < which[y] {
                        term *= pair_ratio[x][y];
                    }
                }
            }
            *sum += term;
            return;
        }
        for l in 0..n {
            if remaining[l] > 0 {
                remaining[l] -= 1;
                which[i] = l;
                rec(
                    i + 1,
                    m,
                    n,
                    remaining,
                    which,
                    sum,
                    prefix_ratio,
                    lambda_ratio,
                    pair_ratio,
                );
                remaining[l] += 1;
            }
        }
    }
    rec(
        0,
        m,
        n,
        &mut remaining,
        &mut which,
        &mut sum,
        &prefix_ratio,
        &lambda_ratio,
        &pair_ratio,
    );

    Ok(u_inv * sum)
}

/// Spec-level wrapper selecting the modulus from the global parameter set.
pub fn omega_basis_params(
    mcomp: &Composition,
    t: &[C64],
    lambda: C64,
    z: &[C64],
    params: &ModelParams,
    select: ModulusSelect,
) -> Result<C64> {
    let env = WeightEnv::from_params(params, select);
    omega_basis(mcomp, t, lambda, z, &env)
}

/// θ(x−2η)/θ(x+2η), the cocycle factor of the twisted S_m action.
pub fn twist_ratio(x: C64, env: &WeightEnv) -> Result<C64> {
    let two_eta = 2.0 * env.eta;
    Ok(env.th(x - two_eta)? / env.th_den(x + two_eta, "twist_ratio")?)
}

/// The transposition s_j (1-based j ≤ m−1) applied to an evaluator at t:
/// (s_j f)(t) = f(…,t_{j+1},t_j,…) θ(t_j−t_{j+1}−2η)/θ(t_j−t_{j+1}+2η).
pub fn sym_transposition(
    j: usize,
    f: &dyn Fn(&[C64]) -> Result<C64>,
    t: &[C64],
    env: &WeightEnv,
) -> Result<C64> {
    assert!(j >= 1 && j < t.len(), "transposition index out of range");
    let mut swapped = t.to_vec();
    swapped.swap(j - 1, j);
    Ok(f(&swapped)? * twist_ratio(t[j - 1] - t[j], env)?)
}

/// Cocycle of a general permutation: C_σ(t) = Π over pairs u<v with
/// σ⁻¹(u) > σ⁻¹(v) of θ(t_u−t_v−2η)/θ(t_u−t_v+2η). `perm` is 0-based, and the
/// action is (σf)(t) = f(t_{σ(1)},…,t_{σ(m)}) C_σ(t).
pub fn twist_cocycle(perm: &[usize], t: &[C64], env: &WeightEnv) -> Result<C64> {
    let m = perm.len();
    let mut inv = vec![0usize; m];
    for (pos, &val) in perm.iter().enumerate() {
        inv[val] = pos;
    }
    let mut c = C64::new(1.0, 0.0);
    for u in 0..m {
        for v in u + 1..m {
            if inv[u] > inv[v] {
                c *= twist_ratio(t[u] - t[v], env)?;
            }
        }
    }
    Ok(c)
}

fn permutations(m: usize) -> Vec<Vec<usize>> {
    fn rec(items: &mut Vec<usize>, k: usize, out: &mut Vec<Vec<usize>>) {
        if k == items.len() {
            out.push(items.clone());
            return;
        }
        for i in k..items.len() {
            items.swap(k, i);
            rec(items, k + 1, out);
            items.swap(k, i);
        }
    }
    let mut items: Vec<usize> = (0..m).collect();
    let mut out = Vec::new();
    rec(&mut items, 0, &mut out);
    out
}

/// Sym f = Σ_{σ∈S_m} (σf), the projector (up to normalization) onto the
/// twisted invariants.
pub fn symmetrize(f: &dyn Fn(&[C64]) -> Result<C64>, t: &[C64], env: &WeightEnv) -> Result<C64> {
    let m = t.len();
    let mut sum = C64::new(0.0, 0.0);
    for perm in permutations(m) {
        let permuted: Vec<C64> = perm.iter().map(|&i| t[i]).collect();
        sum += f(&permuted)? * twist_cocycle(&perm, t, env)?;
    }
    Ok(sum)
}

/// Factor split for the tensor map Φ: the left system carries the first
/// `n_left` factors and `m_left` variables.
#[derive(Debug, Clone, Copy)]
pub struct PhiSplit {
    pub n_left: usize,
    pub n_right: usize,
    pub m_left: usize,
    pub m_right: usize,
}

/// The tensor map Φ(f⊗g) of two subsystem evaluators:
///
/// ```text
/// Φ(f⊗g)(t) = 1/(m′!m″!) Sym( f(t₁..t_{m′}) g(t_{m′+1}..t_m)
///             Π_{m′<j≤m} Π_{l≤n′} θ(t_j−z_l+a_l)/θ(t_j−z_l−a_l) ),
/// ```
///
/// where g must already be evaluated at λ−2ν, ν = a₁+…+a_{n′}−2ηm′. `z` and
/// `env.a` are the lists of the combined system; only the first `n_left`
/// entries enter the interpolation ratio.
pub fn tensor_map_phi(
    f: Evaluator,
    g: Evaluator,
    split: PhiSplit,
    z: Vec<C64>,
    env: WeightEnv,
) -> Evaluator {
    let m_left = split.m_left;
    let m_right = split.m_right;
    let n_left = split.n_left;
    let norm = (factorial(m_left) * factorial(m_right)) as f64;
    Box::new(move |t: &[C64]| {
        assert_eq!(t.len(), m_left + m_right, "Φ image takes m′+m″ variables");
        let raw = |s: &[C64]| -> Result<C64> {
            let mut v = f(&s[..m_left])? * g(&s[m_left..])?;
            for &sj in &s[m_left..] {
                for l in 0..n_left {
                    v *= env.th(sj - z[l] + env.a[l])?
                        / env.th_den(sj - z[l] - env.a[l], "tensor_map_phi")?;
                }
            }
            Ok(v)
        };
        Ok(symmetrize(&raw, t, &env)? / norm)
    })
}

fn factorial(k: usize) -> usize {
    (1..=k).product::<usize>().max(1)
}

/// Exponent b_k of the multiplier picked up by ω_M under z_k → z_k + τ
/// (0-based k):
///
/// ```text
/// b_k = 2πi m_k (λ + 2ηm_k − 2Σ_{l<k}(a_l − 2ηm_l)) + 4πi a_k Σ_{l>k} m_l.
/// ```
pub fn z_shift_exponent(mcomp: &Composition, k: usize, lambda: C64, env: &WeightEnv) -> C64 {
    let parts = mcomp.parts();
    let mk = parts[k] as f64;
    let prefix: C64 = (0..k)
        .map(|l| env.a[l] - 2.0 * env.eta * parts[l] as f64)
        .sum();
    let suffix: f64 = parts[k + 1..].iter().map(|&x| x as f64).sum();
    two_pi_i() * mk * (lambda + 2.0 * env.eta * mk - 2.0 * prefix)
        + 2.0 * two_pi_i() * env.a[k] * suffix
}
