//! Small dense complex matrices with LU solve, inversion and a 1-norm
//! condition number.
//!
//! Every linear system in this crate has dimension dim V[0] ≤ a few; a
//! partial-pivot elimination with explicit condition monitoring is all that is
//! needed, and keeps the numerics fully deterministic.

use num_complex::Complex64 as C64;

use crate::error::{Error, Result};

/// Row-major square complex matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct CMat {
    n: usize,
    a: Vec<C64>,
}

impl CMat {
    pub fn zeros(n: usize) -> Self {
        CMat {
            n,
            a: vec![C64::new(0.0, 0.0); n * n],
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = CMat::zeros(n);
        for i in 0..n {
            m[(i, i)] = C64::new(1.0, 0.0);
        }
        m
    }

    pub fn from_rows(rows: &[Vec<C64>]) -> Self {
        let n = rows.len();
        assert!(rows.iter().all(|r| r.len() == n), "matrix must be square");
        CMat {
            n,
            a: rows.iter().flatten().copied().collect(),
        }
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn row(&self, i: usize) -> &[C64] {
        &self.a[i * self.n..(i + 1) * self.n]
    }

    /// Matrix product self · other.
    pub fn mul(&self, other: &CMat) -> CMat {
        assert_eq!(self.n, other.n);
        let n = self.n;
        let mut out = CMat::zeros(n);
        for i in 0..n {
            for k in 0..n {
                let s = self[(i, k)];
                if s == C64::new(0.0, 0.0) {
                    continue;
                }
                for j in 0..n {
                    out[(i, j)] += s * other[(k, j)];
                }
            }
        }
        out
    }

    /// Matrix-vector product.
    pub fn mul_vec(&self, v: &[C64]) -> Vec<C64> {
        assert_eq!(self.n, v.len());
        (0..self.n)
            .map(|i| {
                self.row(i)
                    .iter()
                    .zip(v)
                    .map(|(a, b)| a * b)
                    .sum::<C64>()
            })
            .collect()
    }

    /// Scale every entry.
    pub fn scaled(&self, s: C64) -> CMat {
        CMat {
            n: self.n,
            a: self.a.iter().map(|x| x * s).collect(),
        }
    }

    /// Largest entry magnitude.
    pub fn max_abs(&self) -> f64 {
        self.a.iter().map(|x| x.norm()).fold(0.0, f64::max)
    }

    /// Largest entry magnitude of self − other.
    pub fn max_abs_diff(&self, other: &CMat) -> f64 {
        assert_eq!(self.n, other.n);
        self.a
            .iter()
            .zip(&other.a)
            .map(|(x, y)| (x - y).norm())
            .fold(0.0, f64::max)
    }

    /// 1-norm (maximum absolute column sum).
    pub fn norm_one(&self) -> f64 {
        (0..self.n)
            .map(|j| (0..self.n).map(|i| self[(i, j)].norm()).sum::<f64>())
            .fold(0.0, f64::max)
    }

    /// LU-factorize with partial pivoting and solve for several right-hand
    /// side columns at once. `rhs` has one inner Vec per column.
    pub fn solve_columns(&self, rhs: &[Vec<C64>]) -> Result<Vec<Vec<C64>>> {
        let n = self.n;
        let mut lu = self.a.clone();
        let mut perm: Vec<usize> = (0..n).collect();
        for col in 0..n {
            let (pivot_row, pivot_mag) = (col..n)
                .map(|r| (r, lu[r * n + col].norm()))
                .max_by(|a, b| a.1.total_cmp(&b.1))
                .unwrap();
            if pivot_mag < f64::MIN_POSITIVE.sqrt() {
                return Err(Error::IllConditioned {
                    cond: f64::INFINITY,
                    retries: 0,
                });
            }
            if pivot_row != col {
                for j in 0..n {
                    lu.swap(col * n + j, pivot_row * n + j);
                }
                perm.swap(col, pivot_row);
            }
            let inv_pivot = lu[col * n + col].finv();
            for r in col + 1..n {
                let f = lu[r * n + col] * inv_pivot;
                lu[r * n + col] = f;
                for j in col + 1..n {
                    let s = lu[col * n + j];
                    lu[r * n + j] -= f * s;
                }
            }
        }

        let mut out = Vec::with_capacity(rhs.len());
        for b in rhs {
            assert_eq!(b.len(), n);
            let mut x: Vec<C64> = perm.iter().map(|&i| b[i]).collect();
            for i in 0..n {
                for j in 0..i {
                    let f = lu[i * n + j] * x[j];
                    x[i] -= f;
                }
            }
            for i in (0..n).rev() {
                for j in i + 1..n {
                    let f = lu[i * n + j] * x[j];
                    x[i] -= f;
                }
                x[i] /= lu[i * n + i];
            }
            out.push(x);
        }
        Ok(out)
    }

    /// Explicit inverse via column solves.
    pub fn inverse(&self) -> Result<CMat> {
        let n = self.n;
        let cols: Vec<Vec<C64>> = (0..n)
            .map(|j| {
                (0..n)
                    .map(|i| {
                        if i == j {
                            C64::new(1.0, 0.0)
                        } else {
                            C64::new(0.0, 0.0)
                        }
                    })
                    .collect()
            })
            .collect();
        let solved = self.solve_columns(&cols)?;
        let mut inv = CMat::zeros(n);
        for (j, col) in solved.iter().enumerate() {
            for i in 0..n {
                inv[(i, j)] = col[i];
            }
        }
        Ok(inv)
    }

    /// 1-norm condition number ‖A‖₁‖A⁻¹‖₁, or +∞ if singular.
    pub fn cond_one(&self) -> f64 {
        match self.inverse() {
            Ok(inv) => self.norm_one() * inv.norm_one(),
            Err(_) => f64::INFINITY,
        }
    }
}

impl std::ops::Index<(usize, usize)> for CMat {
    type Output = C64;
    fn index(&self, (i, j): (usize, usize)) -> &C64 {
        &self.a[i * self.n + j]
    }
}

impl std::ops::IndexMut<(usize, usize)> for CMat {
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut C64 {
        &mut self.a[i * self.n + j]
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn random_matrix(n: usize, seed: u64) -> CMat {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut m = CMat::zeros(n);
        for i in 0..n {
            for j in 0..n {
                m[(i, j)] = C64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0));
            }
        }
        m
    }

    #[test]
    fn solve_recovers_solution() {
        for n in 1..=6 {
            let a = random_matrix(n, 40 + n as u64);
            let x: Vec<C64> = (0..n).map(|i| C64::new(i as f64 + 0.5, -(i as f64))).collect();
            let b = a.mul_vec(&x);
            let got = a.solve_columns(&[b]).unwrap().remove(0);
            for (xi, gi) in x.iter().zip(&got) {
                assert!((xi - gi).norm() < 1e-11, "n={n}");
            }
        }
    }

    #[test]
    fn inverse_roundtrip() {
        let a = random_matrix(5, 99);
        let inv = a.inverse().unwrap();
        let prod = a.mul(&inv);
        assert!(prod.max_abs_diff(&CMat::identity(5)) < 1e-11);
    }

    #[test]
    fn singular_detected() {
        let mut a = CMat::zeros(3);
        a[(0, 0)] = C64::new(1.0, 0.0);
        a[(1, 1)] = C64::new(1.0, 0.0);
        // third row zero
        assert!(a.solve_columns(&[vec![C64::new(1.0, 0.0); 3]]).is_err());
        assert!(a.cond_one().is_infinite());
    }

    #[test]
    fn condition_of_identity() {
        let id = CMat::identity(4);
        assert!((id.cond_one() - 1.0).abs() < 1e-12);
    }
}
