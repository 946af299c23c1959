//! Compositions, the zero-weight space V[0], and the global parameter set.
//!
//! A composition M = (m₁,…,mₙ) of m indexes both the weight-function basis of
//! F^m and the basis e_M = e_{m₁}⊗…⊗e_{mₙ} of the zero-weight space of
//! V_{Λ₁}⊗…⊗V_{Λₙ}. The zero-weight condition Σ(Λ_k−2m_k) = 0 is equivalent
//! to the bookkeeping rule Σa_k = 2ηm with a_k = ηΛ_k, which the parameter set
//! enforces at construction.

use std::collections::HashMap;
use std::sync::Arc;

use num_complex::Complex64 as C64;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::theta::{EllipticModulus, TruncationPolicy};

/// An ordered n-tuple of nonnegative integers.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Composition(pub Vec<usize>);

impl Composition {
    pub fn parts(&self) -> &[usize] {
        &self.0
    }

    pub fn n(&self) -> usize {
        self.0.len()
    }

    pub fn total(&self) -> usize {
        self.0.iter().sum()
    }

    /// The composition with entries j and j+1 exchanged (0-based slot j).
    pub fn swapped(&self, j: usize) -> Composition {
        let mut p = self.0.clone();
        p.swap(j, j + 1);
        Composition(p)
    }
}

impl std::fmt::Display for Composition {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "(")?;
        for (i, p) in self.0.iter().enumerate() {
            if i > 0 {
                write!(f, ",")?;
            }
            write!(f, "{p}")?;
        }
        write!(f, ")")
    }
}

/// All n-part compositions of m in ascending lexicographic order.
///
/// The count is C(n+m−1, m), the dimension of F^m.
pub fn compositions(m: usize, n: usize) -> Vec<Composition> {
    assert!(n >= 1, "compositions need at least one part");
    fn rec(m: usize, n: usize, prefix: &mut Vec<usize>, out: &mut Vec<Composition>) {
        if n == 1 {
            prefix.push(m);
            out.push(Composition(prefix.clone()));
            prefix.pop();
            return;
        }
        for k in 0..=m {
            prefix.push(k);
            rec(m - k, n - 1, prefix, out);
            prefix.pop();
        }
    }
    let mut out = Vec::new();
    rec(m, n, &mut Vec::new(), &mut out);
    out
}

/// Basis bookkeeping for the zero-weight space of an n-fold tensor product at
/// total degree m.
#[derive(Debug, Clone)]
pub struct ZeroWeightSpace {
    pub m: usize,
    pub n: usize,
    comps: Vec<Composition>,
    index: HashMap<Composition, usize>,
}

impl ZeroWeightSpace {
    pub fn new(m: usize, n: usize) -> Arc<Self> {
        let comps = compositions(m, n);
        let index = comps
            .iter()
            .cloned()
            .enumerate()
            .map(|(i, c)| (c, i))
            .collect();
        Arc::new(ZeroWeightSpace {
            m,
            n,
            comps,
            index,
        })
    }

    pub fn dim(&self) -> usize {
        self.comps.len()
    }

    pub fn comps(&self) -> &[Composition] {
        &self.comps
    }

    pub fn idx(&self, c: &Composition) -> usize {
        self.index[c]
    }
}

/// A vector in V[0], indexed by compositions.
#[derive(Debug, Clone)]
pub struct ZeroWeightVector {
    pub space: Arc<ZeroWeightSpace>,
    pub coords: Vec<C64>,
}

impl ZeroWeightVector {
    pub fn zero(space: Arc<ZeroWeightSpace>) -> Self {
        let coords = vec![C64::new(0.0, 0.0); space.dim()];
        ZeroWeightVector { space, coords }
    }

    pub fn get(&self, c: &Composition) -> C64 {
        self.coords[self.space.idx(c)]
    }

    pub fn set(&mut self, c: &Composition, v: C64) {
        let i = self.space.idx(c);
        self.coords[i] = v;
    }

    pub fn norm_inf(&self) -> f64 {
        self.coords.iter().map(|x| x.norm()).fold(0.0, f64::max)
    }
}

/// Numeric policy shared by the higher modules.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct NumericOptions {
    /// Margin (in lattice distance) below which a θ-denominator counts as a
    /// pole hit.
    pub pole_margin: f64,
    /// Cap on the number of terms in combinatorial subset sums.
    pub comb_cap: usize,
    /// Seed for every generic-point draw.
    pub seed: u64,
    /// Condition-number ceiling for transition-matrix sample systems.
    pub cond_cap: f64,
    /// Resampling retries before giving up on a well-conditioned system.
    pub max_retries: usize,
}

impl Default for NumericOptions {
    fn default() -> Self {
        NumericOptions {
            pole_margin: 1e-6,
            comb_cap: 1_000_000,
            seed: 0x5eed,
            cond_cap: 1e8,
            max_retries: 16,
        }
    }
}

/// The full parameter tuple (τ, p, η, Λ₁..Λₙ) with m fixed by ΣΛ_k = 2m.
#[derive(Debug, Clone)]
pub struct ModelParams {
    pub tau: C64,
    pub p: C64,
    pub eta: C64,
    pub lambdas: Vec<C64>,
    pub m: usize,
    pub trunc: TruncationPolicy,
    pub opts: NumericOptions,
    modulus_tau: EllipticModulus,
    modulus_p: EllipticModulus,
}

impl ModelParams {
    /// Build and validate a parameter set. Requires Im τ > 0, Im p > 0 and the
    /// zero-weight sum rule ΣΛ_k = 2m (equivalently Σa_k = 2ηm).
    pub fn new(
        tau: C64,
        p: C64,
        eta: C64,
        lambdas: Vec<C64>,
        m: usize,
        trunc: TruncationPolicy,
        opts: NumericOptions,
    ) -> Result<Self> {
        let modulus_tau = EllipticModulus::new(tau)?;
        let modulus_p = EllipticModulus::new(p)?;
        if lambdas.is_empty() {
            return Err(Error::InvalidParameter("need at least one weight".into()));
        }
        if eta.norm() == 0.0 {
            return Err(Error::InvalidParameter("eta must be nonzero".into()));
        }
        let sum: C64 = lambdas.iter().sum();
        let defect = (sum - 2.0 * m as f64).norm();
        if defect > 1e-9 {
            return Err(Error::InvalidParameter(format!(
                "weights must satisfy ΣΛ_k = 2m (zero-weight bookkeeping); ΣΛ = {sum}, m = {m}"
            )));
        }
        Ok(ModelParams {
            tau,
            p,
            eta,
            lambdas,
            m,
            trunc,
            opts,
            modulus_tau,
            modulus_p,
        })
    }

    pub fn n(&self) -> usize {
        self.lambdas.len()
    }

    /// a_k = ηΛ_k (0-based k).
    pub fn a(&self, k: usize) -> C64 {
        self.eta * self.lambdas[k]
    }

    pub fn a_vec(&self) -> Vec<C64> {
        self.lambdas.iter().map(|l| self.eta * l).collect()
    }

    pub fn modulus_tau(&self) -> &EllipticModulus {
        &self.modulus_tau
    }

    pub fn modulus_p(&self) -> &EllipticModulus {
        &self.modulus_p
    }

    /// The zero-weight space of V_{Λ₁}⊗…⊗V_{Λₙ} at degree m.
    pub fn zero_weight_space(&self) -> Arc<ZeroWeightSpace> {
        ZeroWeightSpace::new(self.m, self.n())
    }

    /// Eigenvalue of h^{(l)} on the basis vector e_L (0-based slot l).
    pub fn h_weight(&self, comp: &Composition, l: usize) -> C64 {
        self.lambdas[l] - 2.0 * comp.parts()[l] as f64
    }

    /// Σ_{l<k} (Λ_l − 2m_l) for 0-based exclusive k.
    pub fn h_prefix_sum(&self, comp: &Composition, k: usize) -> C64 {
        (0..k).map(|l| self.h_weight(comp, l)).sum()
    }

    /// Parameter set with the two factors at slots j, j+1 exchanged.
    pub fn swapped(&self, j: usize) -> ModelParams {
        let mut lambdas = self.lambdas.clone();
        lambdas.swap(j, j + 1);
        ModelParams {
            lambdas,
            ..self.clone()
        }
    }

    /// Parameter set with the roles of τ and p exchanged (dual modulus).
    pub fn dual(&self) -> ModelParams {
        ModelParams {
            tau: self.p,
            p: self.tau,
            modulus_tau: self.modulus_p,
            modulus_p: self.modulus_tau,
            ..self.clone()
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn composition_enumeration() {
        assert_eq!(compositions(0, 3), vec![Composition(vec![0, 0, 0])]);
        assert_eq!(
            compositions(1, 2),
            vec![Composition(vec![0, 1]), Composition(vec![1, 0])]
        );
        // C(4,2) = 6
        let c = compositions(2, 3);
        assert_eq!(c.len(), 6);
        let mut sorted = c.clone();
        sorted.sort();
        assert_eq!(c, sorted, "enumeration must be lexicographic");
        assert!(c.iter().all(|comp| comp.total() == 2));
    }

    #[test]
    fn binomial_count() {
        fn binom(n: usize, k: usize) -> usize {
            (0..k).fold(1, |acc, i| acc * (n - i) / (i + 1))
        }
        for (m, n) in [(3, 2), (4, 3), (2, 4)] {
            assert_eq!(compositions(m, n).len(), binom(n + m - 1, m));
        }
    }

    #[test]
    fn sum_rule_enforced() {
        let tau = C64::new(0.0, 0.8);
        let p = C64::new(0.0, 0.6);
        let eta = C64::new(0.2, -0.1);
        let ok = ModelParams::new(
            tau,
            p,
            eta,
            vec![C64::new(1.0, 0.3), C64::new(1.0, -0.3)],
            1,
            TruncationPolicy::default(),
            NumericOptions::default(),
        );
        assert!(ok.is_ok());
        let bad = ModelParams::new(
            tau,
            p,
            eta,
            vec![C64::new(1.0, 0.0), C64::new(0.5, 0.0)],
            1,
            TruncationPolicy::default(),
            NumericOptions::default(),
        );
        assert!(bad.is_err());
    }

    #[test]
    fn zero_weight_space_indexing() {
        let s = ZeroWeightSpace::new(2, 3);
        assert_eq!(s.dim(), 6);
        for (i, c) in s.comps().iter().enumerate() {
            assert_eq!(s.idx(c), i);
        }
    }

    mod properties {
        use super::*;
        use proptest::prelude::*;

        fn binom(n: usize, k: usize) -> usize {
            (0..k).fold(1, |acc, i| acc * (n - i) / (i + 1))
        }

        proptest! {
            #[test]
            fn composition_enumeration_properties(m in 0usize..6, n in 1usize..5) {
                let comps = compositions(m, n);
                prop_assert_eq!(comps.len(), binom(n + m - 1, m));
                prop_assert!(comps.iter().all(|c| c.total() == m && c.n() == n));
                let mut sorted = comps.clone();
                sorted.sort();
                sorted.dedup();
                prop_assert_eq!(comps, sorted);
            }
        }
    }
}
