//! Squared-exponential kernel and its hyperparameters.
//!
//! The kernel is `k(x, x') = sigma_f^2 * exp(-1/2 * sum_i (x_i - x'_i)^2 / l_i^2)`.
//! Length-scales are either a single shared value (isotropic) or one per input
//! dimension (ARD). Hyperparameters are strictly positive and are optimized in
//! log-space elsewhere in the crate.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Relative diagonal jitter applied before factorizing any kernel matrix.
pub const JITTER_REL: f64 = 1e-8;

/// Kernel and noise hyperparameters: signal variance `sigma_f^2`, noise
/// variance `sigma_w^2`, and one or `d` length-scales.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Hyperparameters {
    pub signal_variance: f64,
    pub noise_variance: f64,
    pub length_scales: Vec<f64>,
}

impl Hyperparameters {
    pub fn new(signal_variance: f64, noise_variance: f64, length_scales: Vec<f64>) -> Result<Self> {
        let h = Self {
            signal_variance,
            noise_variance,
            length_scales,
        };
        h.validate()?;
        Ok(h)
    }

    /// Isotropic hyperparameters: one shared length-scale.
    pub fn isotropic(signal_variance: f64, noise_variance: f64, length_scale: f64) -> Result<Self> {
        Self::new(signal_variance, noise_variance, vec![length_scale])
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.signal_variance.is_finite() && self.signal_variance > 0.0) {
            return Err(Error::InvalidHyperparameters(format!(
                "signal_variance must be positive, got {}",
                self.signal_variance
            )));
        }
        if !(self.noise_variance.is_finite() && self.noise_variance > 0.0) {
            return Err(Error::InvalidHyperparameters(format!(
                "noise_variance must be positive, got {}",
                self.noise_variance
            )));
        }
        if self.length_scales.is_empty() {
            return Err(Error::InvalidHyperparameters(
                "length_scales must not be empty".into(),
            ));
        }
        if self.length_scales.iter().any(|&l| !(l.is_finite() && l > 0.0)) {
            return Err(Error::InvalidHyperparameters(format!(
                "length_scales must all be positive, got {:?}",
                self.length_scales
            )));
        }
        Ok(())
    }

    /// True when compatible with `d`-dimensional inputs (one shared scale or
    /// one scale per dimension).
    pub fn compatible_with_dim(&self, d: usize) -> bool {
        self.length_scales.len() == 1 || self.length_scales.len() == d
    }

    /// Length-scale used for input dimension `i`.
    #[inline]
    pub fn length_scale(&self, i: usize) -> f64 {
        if self.length_scales.len() == 1 {
            self.length_scales[0]
        } else {
            self.length_scales[i]
        }
    }

    /// Diagonal jitter added before any factorization.
    #[inline]
    pub fn jitter(&self) -> f64 {
        JITTER_REL * self.signal_variance
    }

    /// Number of free parameters in log-space: `[log sigma_f^2, log sigma_w^2, log l..]`.
    pub fn n_params(&self) -> usize {
        2 + self.length_scales.len()
    }

    /// Pack into the log-space parameter vector.
    pub fn to_log_params(&self) -> Vec<f64> {
        let mut v = Vec::with_capacity(self.n_params());
        v.push(self.signal_variance.ln());
        v.push(self.noise_variance.ln());
        v.extend(self.length_scales.iter().map(|l| l.ln()));
        v
    }

    /// Inverse of [`to_log_params`](Self::to_log_params).
    pub fn from_log_params(params: &[f64]) -> Result<Self> {
        if params.len() < 3 {
            return Err(Error::InvalidHyperparameters(format!(
                "need at least 3 log-parameters, got {}",
                params.len()
            )));
        }
        Self::new(
            params[0].exp(),
            params[1].exp(),
            params[2..].iter().map(|p| p.exp()).collect(),
        )
    }
}

fn check_dims(x: &[f64], x2: &[f64], h: &Hyperparameters) -> Result<()> {
    if x.len() != x2.len() {
        return Err(Error::DimensionMismatch {
            expected: x.len(),
            got: x2.len(),
        });
    }
    if !h.compatible_with_dim(x.len()) {
        return Err(Error::DimensionMismatch {
            expected: x.len(),
            got: h.length_scales.len(),
        });
    }
    Ok(())
}

/// Squared scaled distance `sum_i (x_i - x2_i)^2 / l_i^2`.
#[inline]
pub fn scaled_sq_dist(x: &[f64], x2: &[f64], h: &Hyperparameters) -> f64 {
    let iso = h.length_scales.len() == 1;
    let mut s = 0.0;
    for i in 0..x.len() {
        let l = if iso { h.length_scales[0] } else { h.length_scales[i] };
        let d = (x[i] - x2[i]) / l;
        s += d * d;
    }
    s
}

/// Squared-exponential kernel value; symmetric, in `(0, sigma_f^2]`.
pub fn se_kernel(x: &[f64], x2: &[f64], h: &Hyperparameters) -> Result<f64> {
    check_dims(x, x2, h)?;
    Ok(se_kernel_unchecked(x, x2, h))
}

#[inline]
pub(crate) fn se_kernel_unchecked(x: &[f64], x2: &[f64], h: &Hyperparameters) -> f64 {
    h.signal_variance * (-0.5 * scaled_sq_dist(x, x2, h)).exp()
}

/// Gradient of the kernel at `(x, x2)`.
#[derive(Debug, Clone)]
pub struct KernelGrad {
    /// Kernel value itself.
    pub value: f64,
    /// d k / d log sigma_f^2 (equals the kernel value).
    pub wrt_log_signal_variance: f64,
    /// d k / d log l_i, one entry per stored length-scale (1 for isotropic).
    pub wrt_log_length_scales: Vec<f64>,
    /// d k / d x2, one entry per input dimension.
    pub wrt_x2: Vec<f64>,
}

/// Analytic kernel gradient with respect to the log-hyperparameters and to
/// the second argument.
pub fn se_kernel_grad(x: &[f64], x2: &[f64], h: &Hyperparameters) -> Result<KernelGrad> {
    check_dims(x, x2, h)?;
    let k = se_kernel_unchecked(x, x2, h);
    let iso = h.length_scales.len() == 1;
    let mut wrt_log_length_scales = vec![0.0; h.length_scales.len()];
    let mut wrt_x2 = vec![0.0; x.len()];
    for i in 0..x.len() {
        let l = h.length_scale(i);
        let diff = x[i] - x2[i];
        let scaled = diff / (l * l);
        // d/d log l_i of -1/2 (x_i - x2_i)^2 / l_i^2 is (x_i - x2_i)^2 / l_i^2.
        let g = k * diff * scaled;
        if iso {
            wrt_log_length_scales[0] += g;
        } else {
            wrt_log_length_scales[i] = g;
        }
        wrt_x2[i] = k * scaled;
    }
    Ok(KernelGrad {
        value: k,
        wrt_log_signal_variance: k,
        wrt_log_length_scales,
        wrt_x2,
    })
}

/// Covariance matrix between two point sets given as rows of `x` and `x2`.
///
/// Empty inputs yield the corresponding `0 x m` (or `n x 0`) matrix.
pub fn cov_matrix(x: &DMatrix<f64>, x2: &DMatrix<f64>, h: &Hyperparameters) -> Result<DMatrix<f64>> {
    let (n, d) = (x.nrows(), x.ncols());
    let (m, d2) = (x2.nrows(), x2.ncols());
    if n > 0 && m > 0 && d != d2 {
        return Err(Error::DimensionMismatch { expected: d, got: d2 });
    }
    let dim = if n > 0 { d } else { d2 };
    if (n > 0 || m > 0) && !h.compatible_with_dim(dim) {
        return Err(Error::DimensionMismatch {
            expected: dim,
            got: h.length_scales.len(),
        });
    }
    let mut out = DMatrix::zeros(n, m);
    // Row-major point access through slices keeps the inner loop simple.
    let xr: Vec<Vec<f64>> = (0..n).map(|i| x.row(i).iter().copied().collect()).collect();
    let x2r: Vec<Vec<f64>> = (0..m).map(|j| x2.row(j).iter().copied().collect()).collect();
    for j in 0..m {
        for i in 0..n {
            out[(i, j)] = se_kernel_unchecked(&xr[i], &x2r[j], h);
        }
    }
    Ok(out)
}

/// Symmetric covariance of a point set with itself, with `extra_diag` added to
/// the diagonal (noise variance plus jitter, typically).
pub fn cov_matrix_sym(x: &DMatrix<f64>, h: &Hyperparameters, extra_diag: f64) -> Result<DMatrix<f64>> {
    let n = x.nrows();
    if n > 0 && !h.compatible_with_dim(x.ncols()) {
        return Err(Error::DimensionMismatch {
            expected: x.ncols(),
            got: h.length_scales.len(),
        });
    }
    let xr: Vec<Vec<f64>> = (0..n).map(|i| x.row(i).iter().copied().collect()).collect();
    let mut out = DMatrix::zeros(n, n);
    for i in 0..n {
        out[(i, i)] = h.signal_variance + extra_diag;
        for j in 0..i {
            let k = se_kernel_unchecked(&xr[i], &xr[j], h);
            out[(i, j)] = k;
            out[(j, i)] = k;
        }
    }
    Ok(out)
}

/// Covariance vector between the rows of `x` and a single query point.
pub fn cov_vector(x: &DMatrix<f64>, query: &[f64], h: &Hyperparameters) -> Result<Vec<f64>> {
    if x.nrows() > 0 && x.ncols() != query.len() {
        return Err(Error::DimensionMismatch {
            expected: x.ncols(),
            got: query.len(),
        });
    }
    if !h.compatible_with_dim(query.len()) {
        return Err(Error::DimensionMismatch {
            expected: query.len(),
            got: h.length_scales.len(),
        });
    }
    let mut out = vec![0.0; x.nrows()];
    let mut row = vec![0.0; x.ncols()];
    for i in 0..x.nrows() {
        for (c, v) in row.iter_mut().enumerate() {
            *v = x[(i, c)];
        }
        out[i] = se_kernel_unchecked(&row, query, h);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn hyper(sf2: f64, sw2: f64, ls: &[f64]) -> Hyperparameters {
        Hyperparameters::new(sf2, sw2, ls.to_vec()).unwrap()
    }

    #[test]
    fn kernel_at_zero_distance_is_signal_variance() {
        let h = hyper(2.5, 0.1, &[1.0]);
        let x = [0.3, -1.2, 4.0];
        assert_eq!(se_kernel(&x, &x, &h).unwrap(), 2.5);
    }

    #[test]
    fn kernel_matches_hand_values() {
        // d=1, l=1, sigma_f^2=1, |x - x2| = sqrt(2) -> exp(-1)
        let h = hyper(1.0, 0.1, &[1.0]);
        let v = se_kernel(&[0.0], &[2.0_f64.sqrt()], &h).unwrap();
        assert_relative_eq!(v, (-1.0_f64).exp(), max_relative = 1e-12);

        // d=2, l=[1,2], diff=[1,2] -> exp(-1/2 * (1 + 1)) = exp(-1)
        let h = hyper(1.0, 0.1, &[1.0, 2.0]);
        let v = se_kernel(&[0.0, 0.0], &[1.0, 2.0], &h).unwrap();
        assert_relative_eq!(v, (-1.0_f64).exp(), max_relative = 1e-12);
    }

    #[test]
    fn kernel_is_symmetric_and_bounded() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let h = hyper(1.7, 0.2, &[0.6, 1.3, 2.2]);
        for _ in 0..50 {
            let a: Vec<f64> = (0..3).map(|_| rng.gen_range(-3.0..3.0)).collect();
            let b: Vec<f64> = (0..3).map(|_| rng.gen_range(-3.0..3.0)).collect();
            let kab = se_kernel(&a, &b, &h).unwrap();
            let kba = se_kernel(&b, &a, &h).unwrap();
            assert_eq!(kab, kba);
            assert!(kab > 0.0 && kab <= h.signal_variance);
        }
    }

    #[test]
    fn kernel_dimension_mismatch_is_an_error() {
        let h = hyper(1.0, 0.1, &[1.0, 1.0, 1.0]);
        assert!(se_kernel(&[0.0, 1.0], &[0.0, 1.0], &h).is_err());
        assert!(se_kernel(&[0.0, 1.0, 2.0], &[0.0, 1.0], &h).is_err());
    }

    #[test]
    fn cov_matrix_single_point_and_empty() {
        let h = hyper(2.5, 0.1, &[1.0]);
        let x = DMatrix::from_row_slice(1, 2, &[0.5, -0.5]);
        let k = cov_matrix(&x, &x, &h).unwrap();
        assert_eq!(k.nrows(), 1);
        assert_eq!(k[(0, 0)], 2.5);

        let empty = DMatrix::<f64>::zeros(0, 2);
        let k = cov_matrix(&empty, &x, &h).unwrap();
        assert_eq!((k.nrows(), k.ncols()), (0, 1));
    }

    #[test]
    fn cov_matrix_is_symmetric_and_near_psd() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let h = hyper(1.9, 0.05, &[0.8, 1.1, 1.4]);
        let n = 20;
        let x = DMatrix::from_fn(n, 3, |_, _| rng.gen_range(-2.0..2.0));
        let k = cov_matrix(&x, &x, &h).unwrap();
        assert!((&k - k.transpose()).amax() < 1e-14);
        // Eigendecomposition oracle: all eigenvalues >= -1e-8 * sigma_f^2.
        let eig = k.symmetric_eigenvalues();
        assert!(eig.iter().all(|&e| e >= -1e-8 * h.signal_variance));
    }

    #[test]
    fn cov_plus_noise_is_positive_definite() {
        let mut rng = ChaCha8Rng::seed_from_u64(13);
        let h = hyper(1.0, 1e-6, &[0.5]);
        let x = DMatrix::from_fn(40, 2, |_, _| rng.gen_range(-1.0..1.0));
        let k = cov_matrix_sym(&x, &h, h.noise_variance + h.jitter()).unwrap();
        assert!(nalgebra::Cholesky::new(k).is_some());
    }

    #[test]
    fn grad_wrt_x2_vanishes_at_coincident_points() {
        let h = hyper(2.0, 0.1, &[0.7, 1.2]);
        let g = se_kernel_grad(&[0.4, -0.9], &[0.4, -0.9], &h).unwrap();
        assert!(g.wrt_x2.iter().all(|&v| v == 0.0));
        assert_eq!(g.wrt_log_signal_variance, g.value);
    }

    #[test]
    fn grad_matches_central_finite_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(17);
        let step = 1e-6;
        for _ in 0..20 {
            let d = rng.gen_range(1..=4);
            let ard = rng.gen_bool(0.5);
            let nls = if ard { d } else { 1 };
            let h = Hyperparameters::new(
                rng.gen_range(0.5..3.0),
                rng.gen_range(0.01..0.5),
                (0..nls).map(|_| rng.gen_range(0.4..2.0)).collect(),
            )
            .unwrap();
            let x: Vec<f64> = (0..d).map(|_| rng.gen_range(-2.0..2.0)).collect();
            let x2: Vec<f64> = (0..d).map(|_| rng.gen_range(-2.0..2.0)).collect();
            let g = se_kernel_grad(&x, &x2, &h).unwrap();

            // log sigma_f^2
            let mut hp = h.clone();
            hp.signal_variance = (h.signal_variance.ln() + step).exp();
            let mut hm = h.clone();
            hm.signal_variance = (h.signal_variance.ln() - step).exp();
            let fd = (se_kernel(&x, &x2, &hp).unwrap() - se_kernel(&x, &x2, &hm).unwrap())
                / (2.0 * step);
            assert_relative_eq!(g.wrt_log_signal_variance, fd, max_relative = 1e-5, epsilon = 1e-9);

            // log length-scales
            for i in 0..nls {
                let mut hp = h.clone();
                hp.length_scales[i] = (h.length_scales[i].ln() + step).exp();
                let mut hm = h.clone();
                hm.length_scales[i] = (h.length_scales[i].ln() - step).exp();
                let fd = (se_kernel(&x, &x2, &hp).unwrap() - se_kernel(&x, &x2, &hm).unwrap())
                    / (2.0 * step);
                if fd.abs() > 1e-12 || g.wrt_log_length_scales[i].abs() > 1e-12 {
                    assert_relative_eq!(g.wrt_log_length_scales[i], fd, max_relative = 1e-5, epsilon = 1e-9);
                }
            }

            // x2 coordinates
            for i in 0..d {
                let mut xp = x2.clone();
                xp[i] += step;
                let mut xm = x2.clone();
                xm[i] -= step;
                let fd =
                    (se_kernel(&x, &xp, &h).unwrap() - se_kernel(&x, &xm, &h).unwrap()) / (2.0 * step);
                if fd.abs() > 1e-12 || g.wrt_x2[i].abs() > 1e-12 {
                    assert_relative_eq!(g.wrt_x2[i], fd, max_relative = 1e-5, epsilon = 1e-9);
                }
            }
        }
    }

    #[test]
    fn log_param_round_trip() {
        let h = hyper(1.3, 0.07, &[0.5, 2.0]);
        let back = Hyperparameters::from_log_params(&h.to_log_params()).unwrap();
        assert_relative_eq!(back.signal_variance, h.signal_variance, max_relative = 1e-14);
        assert_relative_eq!(back.noise_variance, h.noise_variance, max_relative = 1e-14);
    }
}
