//! Dense linear-algebra helpers shared by the regressors.
//!
//! Kernel matrices are factorized through [`jittered_cholesky`], which assumes
//! the jitter is already on the diagonal and reports an ill-conditioned-kernel
//! error naming the hyperparameters when the factorization fails. Large
//! matrices go through a blocked right-looking factorization so the trailing
//! updates run as matrix products instead of scalar loops.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::kernel::Hyperparameters;

/// Lower-triangular Cholesky factor.
#[derive(Debug, Clone)]
pub struct Chol {
    l: DMatrix<f64>,
}

/// Matrices at or above this order use the blocked factorization.
const BLOCKED_MIN: usize = 256;
const BLOCK: usize = 128;

impl Chol {
    /// Factorize a symmetric positive-definite matrix (consumed).
    pub fn new(a: DMatrix<f64>) -> Option<Self> {
        let n = a.nrows();
        if n < BLOCKED_MIN {
            nalgebra::Cholesky::new(a).map(|c| Self { l: c.unpack() })
        } else {
            blocked_cholesky(a).map(|l| Self { l })
        }
    }

    pub fn n(&self) -> usize {
        self.l.nrows()
    }

    /// The lower-triangular factor.
    pub fn l(&self) -> &DMatrix<f64> {
        &self.l
    }

    /// `sum_i log L_ii`, i.e. `1/2 log det`.
    pub fn half_log_det(&self) -> f64 {
        (0..self.l.nrows()).map(|i| self.l[(i, i)].ln()).sum()
    }

    /// Solve `L x = b` in place.
    pub fn solve_lower(&self, b: &mut DMatrix<f64>) {
        self.l.solve_lower_triangular_mut(b);
    }

    /// Solve `L^T x = b` in place.
    pub fn solve_lower_transpose(&self, b: &mut DMatrix<f64>) {
        self.l.tr_solve_lower_triangular_mut(b);
    }

    /// Solve `(L L^T) x = b`.
    pub fn solve(&self, b: &DVector<f64>) -> DVector<f64> {
        let mut x = DMatrix::from_column_slice(b.len(), 1, b.as_slice());
        self.solve_lower(&mut x);
        self.solve_lower_transpose(&mut x);
        DVector::from_column_slice(x.as_slice())
    }

    /// Solve `(L L^T) X = B` for a matrix right-hand side.
    pub fn solve_matrix(&self, b: &DMatrix<f64>) -> DMatrix<f64> {
        let mut x = b.clone();
        self.solve_lower(&mut x);
        self.solve_lower_transpose(&mut x);
        x
    }

    /// Solve `L v = b` for a vector, returning the result.
    pub fn solve_lower_vec(&self, b: &[f64]) -> DVector<f64> {
        let mut x = DMatrix::from_column_slice(b.len(), 1, b);
        self.solve_lower(&mut x);
        DVector::from_column_slice(x.as_slice())
    }
}

/// Blocked right-looking Cholesky; keeps only the lower triangle valid.
fn blocked_cholesky(mut a: DMatrix<f64>) -> Option<DMatrix<f64>> {
    let n = a.nrows();
    let mut k = 0;
    while k < n {
        let kb = BLOCK.min(n - k);
        // Factor the diagonal block.
        let diag = a.view((k, k), (kb, kb)).into_owned();
        let l11 = nalgebra::Cholesky::new(diag)?.unpack();
        a.view_mut((k, k), (kb, kb)).copy_from(&l11);
        let rest = n - k - kb;
        if rest == 0 {
            break;
        }
        // Panel solve: A21 <- A21 * L11^{-T}, done as L11 X^T = A21^T.
        let mut panel_t = a.view((k + kb, k), (rest, kb)).transpose();
        l11.solve_lower_triangular_mut(&mut panel_t);
        let panel = panel_t.transpose();
        a.view_mut((k + kb, k), (rest, kb)).copy_from(&panel);
        // Trailing update on the lower triangle, one column-panel at a time.
        let mut j = 0;
        while j < rest {
            let jb = BLOCK.min(rest - j);
            let rows = rest - j;
            let left = panel.view((j, 0), (rows, kb)).into_owned();
            let right = panel.view((j, 0), (jb, kb)).into_owned();
            let update = &left * right.transpose();
            let mut target = a.view_mut((k + kb + j, k + kb + j), (rows, jb));
            target -= update;
            j += jb;
        }
        k += kb;
    }
    // Zero the (stale) upper triangle so the factor is a clean L.
    for j in 1..n {
        for i in 0..j {
            a[(i, j)] = 0.0;
        }
    }
    Some(a)
}

/// Factorize a kernel matrix, mapping failure to an ill-conditioned-kernel
/// error that names the hyperparameters.
pub fn jittered_cholesky(a: DMatrix<f64>, h: &Hyperparameters) -> Result<Chol> {
    Chol::new(a).ok_or_else(|| Error::IllConditionedKernel {
        signal_variance: h.signal_variance,
        noise_variance: h.noise_variance,
        length_scales: h.length_scales.clone(),
    })
}

/// Mean of a slice.
pub fn mean(v: &[f64]) -> f64 {
    if v.is_empty() {
        0.0
    } else {
        v.iter().sum::<f64>() / v.len() as f64
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_spd(n: usize, seed: u64) -> DMatrix<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let b = DMatrix::from_fn(n, n, |_, _| rng.gen_range(-1.0..1.0));
        &b * b.transpose() + DMatrix::identity(n, n) * (n as f64)
    }

    #[test]
    fn blocked_matches_reference_factorization() {
        for &n in &[300usize, 513] {
            let a = random_spd(n, 42 + n as u64);
            let l = blocked_cholesky(a.clone()).unwrap();
            let rec = &l * l.transpose();
            let err = (&rec - &a).norm() / a.norm();
            assert!(err < 1e-12, "n={n}, rel err {err}");
        }
    }

    #[test]
    fn solve_round_trip() {
        let a = random_spd(100, 3);
        let c = Chol::new(a.clone()).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let b = DVector::from_fn(100, |_, _| rng.gen_range(-1.0..1.0));
        let x = c.solve(&b);
        assert!((&a * &x - &b).norm() < 1e-8);
    }
}
