//! Exact Gaussian process regression.
//!
//! Training minimizes the negative log marginal likelihood over log-space
//! hyperparameters with a quasi-Newton optimizer and a few random restarts.
//! The fitted model caches the Cholesky factor of `K + sigma_w^2 I` and the
//! weight vector `alpha = (K + sigma_w^2 I)^{-1} y`, so a prediction costs one
//! kernel row plus a dot product for the mean and two triangular solves for
//! the variance.

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::dataset::Dataset;
use crate::error::{Error, Result};
use crate::kernel::{cov_matrix_sym, cov_vector, Hyperparameters};
use crate::linalg::{jittered_cholesky, Chol};
use crate::opt::{minimize, OptConfig, OptOutcome};
use crate::predict::{Prediction, Regressor};

/// Options shared by every marginal-likelihood fit in the crate.
#[derive(Debug, Clone)]
pub struct FitOptions {
    pub max_iters: usize,
    pub grad_tol: f64,
    /// Random restarts in addition to the provided initialization.
    pub restarts: usize,
    pub seed: u64,
    /// Subtract the target mean before fitting and restore it at prediction.
    pub center_targets: bool,
    /// Reference variance scale used by callers to detect collapsed signals;
    /// not a hard bound on the optimizer.
    pub var_floor: f64,
}

impl Default for FitOptions {
    fn default() -> Self {
        Self {
            max_iters: 200,
            grad_tol: 1e-5,
            restarts: 3,
            seed: 0,
            center_targets: true,
            var_floor: 1e-4,
        }
    }
}

impl FitOptions {
    pub(crate) fn log_bounds(&self, n_params: usize) -> (Vec<f64>, Vec<f64>) {
        // Variances live in [1e-12, 1e12], length-scales in [1e-9, 1e9];
        // wide enough to never bind on sane problems, tight enough to stop
        // log-space runaway on degenerate ones.
        let mut lo = vec![(1e-12f64).ln(); n_params];
        let mut hi = vec![(1e12f64).ln(); n_params];
        for b in lo.iter_mut().skip(2) {
            *b = (1e-9f64).ln();
        }
        for b in hi.iter_mut().skip(2) {
            *b = (1e9f64).ln();
        }
        (lo, hi)
    }
}

/// Exact-GP negative log marginal likelihood and its gradient with respect to
/// the log-hyperparameters `[log sigma_f^2, log sigma_w^2, log l..]`.
pub fn gp_nlml(data: &Dataset, h: &Hyperparameters) -> Result<(f64, Vec<f64>)> {
    h.validate()?;
    if !h.compatible_with_dim(data.dim()) {
        return Err(Error::DimensionMismatch {
            expected: data.dim(),
            got: h.length_scales.len(),
        });
    }
    let n = data.n();
    let x = data.inputs();
    let y = data.targets();

    let ky = cov_matrix_sym(x, h, h.noise_variance + h.jitter())?;
    let chol = jittered_cholesky(ky.clone(), h)?;
    let alpha = chol.solve(y);

    let value = 0.5 * y.dot(&alpha)
        + chol.half_log_det()
        + 0.5 * n as f64 * (2.0 * std::f64::consts::PI).ln();

    // W = K_y^{-1} - alpha alpha^T drives every gradient component.
    let kinv = chol.solve_matrix(&DMatrix::identity(n, n));
    let mut w = kinv;
    for j in 0..n {
        for i in 0..n {
            w[(i, j)] -= alpha[i] * alpha[j];
        }
    }

    let mut grad = vec![0.0; h.n_params()];
    let trace_w: f64 = (0..n).map(|i| w[(i, i)]).sum();

    // d K_y / d log sigma_f^2 = K_y - sigma_w^2 I (kernel and jitter both
    // scale with the signal variance).
    let mut sf_term = 0.0;
    for j in 0..n {
        for i in 0..n {
            sf_term += w[(i, j)] * ky[(i, j)];
        }
    }
    grad[0] = 0.5 * (sf_term - h.noise_variance * trace_w);
    grad[1] = 0.5 * h.noise_variance * trace_w;

    // Length-scales: contract W .* K against per-dimension squared distances.
    let g = {
        let mut g = w;
        for j in 0..n {
            for i in 0..n {
                g[(i, j)] *= ky[(i, j)];
            }
        }
        // Diagonal distances are zero; zeroing keeps the contraction clean.
        for i in 0..n {
            g[(i, i)] = 0.0;
        }
        g
    };
    let gx = &g * x; // n x d
    let row_sums = &g * DVector::from_element(n, 1.0);
    let iso = h.length_scales.len() == 1;
    for k in 0..data.dim() {
        let l = h.length_scale(k);
        let mut sq_term = 0.0;
        let mut cross = 0.0;
        for i in 0..n {
            let xik = x[(i, k)];
            sq_term += xik * xik * row_sums[i];
            cross += xik * gx[(i, k)];
        }
        let contrib = (sq_term - cross) / (l * l);
        if iso {
            grad[2] += contrib;
        } else {
            grad[2 + k] = contrib;
        }
    }

    Ok((value, grad))
}

/// What the optimizer did, for training reports.
#[derive(Debug, Clone, Default)]
pub struct FitReport {
    pub nlml_initial: f64,
    pub nlml_final: f64,
    pub iterations: usize,
    pub converged: bool,
}

/// An exact GP with cached factorization and prediction weights.
#[derive(Debug, Clone)]
pub struct TrainedGp {
    data: Dataset,
    hyper: Hyperparameters,
    y_mean: f64,
    chol: Chol,
    alpha: DVector<f64>,
    fit_report: FitReport,
}

impl TrainedGp {
    pub fn hyper(&self) -> &Hyperparameters {
        &self.hyper
    }

    pub fn data(&self) -> &Dataset {
        &self.data
    }

    pub fn y_mean(&self) -> f64 {
        self.y_mean
    }

    pub fn alpha(&self) -> &DVector<f64> {
        &self.alpha
    }

    pub fn chol(&self) -> &Chol {
        &self.chol
    }

    pub fn fit_report(&self) -> &FitReport {
        &self.fit_report
    }

    /// Centered targets the caches were built against.
    pub fn centered_targets(&self) -> DVector<f64> {
        self.data.targets().map(|y| y - self.y_mean)
    }
}

fn build_caches(
    data: &Dataset,
    hyper: &Hyperparameters,
    y_mean: f64,
    fit_report: FitReport,
) -> Result<TrainedGp> {
    let ky = cov_matrix_sym(data.inputs(), hyper, hyper.noise_variance + hyper.jitter())?;
    let chol = jittered_cholesky(ky, hyper)?;
    let yc = data.targets().map(|y| y - y_mean);
    let alpha = chol.solve(&yc);
    Ok(TrainedGp {
        data: data.clone(),
        hyper: hyper.clone(),
        y_mean,
        chol,
        alpha,
        fit_report,
    })
}

/// Build the caches at fixed hyperparameters, skipping optimization.
pub fn gp_fit_fixed(data: &Dataset, hyper: &Hyperparameters, center_targets: bool) -> Result<TrainedGp> {
    hyper.validate()?;
    let y_mean = if center_targets {
        data.targets().sum() / data.n() as f64
    } else {
        0.0
    };
    build_caches(data, hyper, y_mean, FitReport::default())
}

pub(crate) struct OptimizedParams {
    pub hyper: Hyperparameters,
    pub outcome: OptOutcome,
    pub initial_value: f64,
}

/// Shared restart loop: minimize `nlml` over `[log-hyper, extra]` from the
/// given start plus `opts.restarts` perturbed starts, keeping the best final
/// value. A start whose gradient is already below tolerance returns
/// immediately with the initial parameters.
pub(crate) fn optimize_log_params<F>(
    mut nlml: F,
    init: &Hyperparameters,
    opts: &FitOptions,
    extra_params: &[f64],
) -> Result<OptimizedParams>
where
    F: FnMut(&[f64]) -> Option<(f64, Vec<f64>)>,
{
    let mut theta0 = init.to_log_params();
    theta0.extend_from_slice(extra_params);
    let n_hyper = init.n_params();
    // Bounds for the hyperparameter block only; extra parameters (pseudo-input
    // coordinates) stay unconstrained.
    let (mut lo, mut hi) = opts.log_bounds(n_hyper);
    lo.resize(theta0.len(), f64::NEG_INFINITY);
    hi.resize(theta0.len(), f64::INFINITY);
    let cfg = OptConfig {
        max_iters: opts.max_iters,
        grad_tol: opts.grad_tol,
        bounds: Some((lo, hi)),
        ..OptConfig::default()
    };

    let (f0, g0) = nlml(&theta0).ok_or(Error::OptimizationFailed {
        last: theta0.clone(),
    })?;
    let g0_norm = g0.iter().fold(0.0f64, |a, &b| a.max(b.abs()));
    if g0_norm <= opts.grad_tol {
        return Ok(OptimizedParams {
            hyper: Hyperparameters::from_log_params(&theta0[..n_hyper])?,
            outcome: OptOutcome {
                x: theta0,
                value: f0,
                grad_inf_norm: g0_norm,
                iterations: 0,
                converged: true,
            },
            initial_value: f0,
        });
    }

    let mut best: Option<OptOutcome> = None;
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    for restart in 0..=opts.restarts {
        let start: Vec<f64> = if restart == 0 {
            theta0.clone()
        } else {
            theta0
                .iter()
                .enumerate()
                .map(|(i, &t)| if i < n_hyper { t + rng.gen_range(-1.0..1.0) } else { t })
                .collect()
        };
        match minimize(&mut nlml, &start, &cfg) {
            Ok(out) => {
                if best.as_ref().is_none_or(|b| out.value < b.value) {
                    best = Some(out);
                }
            }
            Err(_) if restart > 0 => {} // a bad restart is not fatal
            Err(e) => return Err(e),
        }
    }
    let outcome = best.ok_or(Error::OptimizationFailed { last: theta0 })?;
    Ok(OptimizedParams {
        hyper: Hyperparameters::from_log_params(&outcome.x[..n_hyper])?,
        outcome,
        initial_value: f0,
    })
}

/// Fit hyperparameters by marginal likelihood and cache the solve products.
pub fn gp_fit(data: &Dataset, init: &Hyperparameters, opts: &FitOptions) -> Result<TrainedGp> {
    init.validate()?;
    let y_mean = if opts.center_targets {
        data.targets().sum() / data.n() as f64
    } else {
        0.0
    };
    let centered = Dataset::new(data.inputs().clone(), data.targets().map(|y| y - y_mean))?;

    let optimized = optimize_log_params(
        |theta| {
            let h = Hyperparameters::from_log_params(theta).ok()?;
            match gp_nlml(&centered, &h) {
                Ok((v, g)) if v.is_finite() => Some((v, g)),
                _ => None,
            }
        },
        init,
        opts,
        &[],
    )?;

    let report = FitReport {
        nlml_initial: optimized.initial_value,
        nlml_final: optimized.outcome.value,
        iterations: optimized.outcome.iterations,
        converged: optimized.outcome.converged,
    };
    build_caches(data, &optimized.hyper, y_mean, report)
}

/// Posterior prediction at a query point using the cached factorization.
pub fn gp_predict(model: &TrainedGp, x_star: &[f64]) -> Result<Prediction> {
    if x_star.len() != model.data.dim() {
        return Err(Error::DimensionMismatch {
            expected: model.data.dim(),
            got: x_star.len(),
        });
    }
    let k_star = cov_vector(model.data.inputs(), x_star, &model.hyper)?;
    let mean = k_star
        .iter()
        .zip(model.alpha.iter())
        .map(|(k, a)| k * a)
        .sum::<f64>()
        + model.y_mean;
    let v = model.chol.solve_lower_vec(&k_star);
    let variance = (model.hyper.signal_variance - v.norm_squared()).max(0.0);
    Ok(Prediction { mean, variance })
}

impl Regressor for TrainedGp {
    fn input_dim(&self) -> usize {
        self.data.dim()
    }

    fn predict(&self, x: &[f64]) -> Result<Prediction> {
        gp_predict(self, x)
    }
}
