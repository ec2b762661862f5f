//! Limited-memory quasi-Newton minimizer with backtracking line search.
//!
//! The regressors optimize negative log marginal likelihoods over log-space
//! parameters, so the optimizer works on unconstrained vectors with an
//! optional box projection used only as a numerical safety rail.

use crate::error::{Error, Result};

/// Objective evaluation: value and gradient, or `None` when the objective is
/// not finite at the point (treated as +inf by the line search).
pub type Eval = Option<(f64, Vec<f64>)>;

#[derive(Debug, Clone)]
pub struct OptConfig {
    pub max_iters: usize,
    /// Convergence when the gradient infinity-norm drops below this.
    pub grad_tol: f64,
    /// L-BFGS history length.
    pub memory: usize,
    pub max_backtracks: usize,
    pub armijo_c: f64,
    /// Optional elementwise bounds `(lower, upper)` applied after each step.
    pub bounds: Option<(Vec<f64>, Vec<f64>)>,
}

impl Default for OptConfig {
    fn default() -> Self {
        Self {
            max_iters: 200,
            grad_tol: 1e-5,
            memory: 10,
            max_backtracks: 40,
            armijo_c: 1e-4,
            bounds: None,
        }
    }
}

#[derive(Debug, Clone)]
pub struct OptOutcome {
    pub x: Vec<f64>,
    pub value: f64,
    pub grad_inf_norm: f64,
    pub iterations: usize,
    /// True when the gradient tolerance was met (as opposed to hitting the
    /// iteration cap or a failed line search).
    pub converged: bool,
}

fn inf_norm(v: &[f64]) -> f64 {
    v.iter().fold(0.0, |a, &b| a.max(b.abs()))
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn project(x: &mut [f64], bounds: &Option<(Vec<f64>, Vec<f64>)>) -> bool {
    let mut clamped = false;
    if let Some((lo, hi)) = bounds {
        for (i, v) in x.iter_mut().enumerate() {
            if *v < lo[i] {
                *v = lo[i];
                clamped = true;
            } else if *v > hi[i] {
                *v = hi[i];
                clamped = true;
            }
        }
    }
    clamped
}

/// Minimize `f` starting from `x0`.
///
/// Errors with [`Error::OptimizationFailed`] only when the objective is not
/// finite at the (projected) starting point. A line search that cannot make
/// progress ends the run with `converged = false` and the best iterate found.
pub fn minimize<F>(mut f: F, x0: &[f64], cfg: &OptConfig) -> Result<OptOutcome>
where
    F: FnMut(&[f64]) -> Eval,
{
    let mut x = x0.to_vec();
    project(&mut x, &cfg.bounds);
    let (mut fx, mut gx) = f(&x).ok_or(Error::OptimizationFailed { last: x.clone() })?;

    let mut s_hist: Vec<Vec<f64>> = Vec::new();
    let mut y_hist: Vec<Vec<f64>> = Vec::new();
    let mut rho_hist: Vec<f64> = Vec::new();

    let mut iterations = 0;
    loop {
        let gnorm = inf_norm(&gx);
        if gnorm <= cfg.grad_tol {
            return Ok(OptOutcome {
                x,
                value: fx,
                grad_inf_norm: gnorm,
                iterations,
                converged: true,
            });
        }
        if iterations >= cfg.max_iters {
            return Ok(OptOutcome {
                x,
                value: fx,
                grad_inf_norm: gnorm,
                iterations,
                converged: false,
            });
        }
        iterations += 1;

        // Two-loop recursion for the search direction.
        let mut dir: Vec<f64> = gx.iter().map(|g| -g).collect();
        if !s_hist.is_empty() {
            let k = s_hist.len();
            let mut alpha = vec![0.0; k];
            for i in (0..k).rev() {
                alpha[i] = rho_hist[i] * dot(&s_hist[i], &dir);
                for (d, y) in dir.iter_mut().zip(&y_hist[i]) {
                    *d -= alpha[i] * y;
                }
            }
            let last = k - 1;
            let gamma = dot(&s_hist[last], &y_hist[last]) / dot(&y_hist[last], &y_hist[last]);
            for d in dir.iter_mut() {
                *d *= gamma;
            }
            for i in 0..k {
                let beta = rho_hist[i] * dot(&y_hist[i], &dir);
                for (d, s) in dir.iter_mut().zip(&s_hist[i]) {
                    *d += (alpha[i] - beta) * s;
                }
            }
        }

        let mut slope = dot(&gx, &dir);
        if slope >= 0.0 {
            // Curvature information went stale; fall back to steepest descent.
            s_hist.clear();
            y_hist.clear();
            rho_hist.clear();
            dir = gx.iter().map(|g| -g).collect();
            slope = dot(&gx, &dir);
        }

        // Backtracking Armijo line search.
        let mut step = 1.0;
        let mut accepted = None;
        for _ in 0..cfg.max_backtracks {
            let mut cand: Vec<f64> = x.iter().zip(&dir).map(|(xi, di)| xi + step * di).collect();
            let clamped = project(&mut cand, &cfg.bounds);
            if let Some((fc, gc)) = f(&cand) {
                if fc <= fx + cfg.armijo_c * step * slope {
                    accepted = Some((cand, fc, gc, clamped));
                    break;
                }
            }
            step *= 0.5;
        }

        let Some((x_new, f_new, g_new, clamped)) = accepted else {
            // No progress possible along this direction at any step size.
            return Ok(OptOutcome {
                x,
                value: fx,
                grad_inf_norm: gnorm,
                iterations,
                converged: false,
            });
        };

        if clamped {
            // The projection invalidates the quasi-Newton history.
            s_hist.clear();
            y_hist.clear();
            rho_hist.clear();
        } else {
            let s: Vec<f64> = x_new.iter().zip(&x).map(|(a, b)| a - b).collect();
            let yv: Vec<f64> = g_new.iter().zip(&gx).map(|(a, b)| a - b).collect();
            let sy = dot(&s, &yv);
            if sy > 1e-12 * inf_norm(&s) * inf_norm(&yv) && sy > 0.0 {
                if s_hist.len() == cfg.memory {
                    s_hist.remove(0);
                    y_hist.remove(0);
                    rho_hist.remove(0);
                }
                rho_hist.push(1.0 / sy);
                s_hist.push(s);
                y_hist.push(yv);
            }
        }

        x = x_new;
        fx = f_new;
        gx = g_new;
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn minimizes_quadratic_bowl() {
        let f = |x: &[f64]| {
            let v = 2.0 * (x[0] - 1.0).powi(2) + 0.5 * (x[1] + 3.0).powi(2);
            let g = vec![4.0 * (x[0] - 1.0), (x[1] + 3.0)];
            Some((v, g))
        };
        let out = minimize(f, &[10.0, -10.0], &OptConfig::default()).unwrap();
        assert!(out.converged);
        assert_relative_eq!(out.x[0], 1.0, epsilon = 1e-4);
        assert_relative_eq!(out.x[1], -3.0, epsilon = 1e-4);
    }

    #[test]
    fn minimizes_rosenbrock() {
        let f = |x: &[f64]| {
            let (a, b) = (x[0], x[1]);
            let v = (1.0 - a).powi(2) + 100.0 * (b - a * a).powi(2);
            let g = vec![
                -2.0 * (1.0 - a) - 400.0 * a * (b - a * a),
                200.0 * (b - a * a),
            ];
            Some((v, g))
        };
        let cfg = OptConfig {
            max_iters: 500,
            grad_tol: 1e-8,
            ..OptConfig::default()
        };
        let out = minimize(f, &[-1.2, 1.0], &cfg).unwrap();
        assert!(out.converged, "grad norm {}", out.grad_inf_norm);
        assert_relative_eq!(out.x[0], 1.0, epsilon = 1e-5);
        assert_relative_eq!(out.x[1], 1.0, epsilon = 1e-5);
    }

    #[test]
    fn converged_start_takes_no_steps() {
        let f = |x: &[f64]| Some((x[0] * x[0], vec![2.0 * x[0]]));
        let out = minimize(f, &[1e-9], &OptConfig::default()).unwrap();
        assert!(out.converged);
        assert_eq!(out.iterations, 0);
    }

    #[test]
    fn non_finite_start_is_an_error() {
        let f = |_: &[f64]| -> Eval { None };
        assert!(minimize(f, &[1.0], &OptConfig::default()).is_err());
    }

    #[test]
    fn bounds_are_respected() {
        let f = |x: &[f64]| Some(((x[0] + 5.0).powi(2), vec![2.0 * (x[0] + 5.0)]));
        let cfg = OptConfig {
            bounds: Some((vec![-1.0], vec![1.0])),
            ..OptConfig::default()
        };
        let out = minimize(f, &[0.5], &cfg).unwrap();
        assert_relative_eq!(out.x[0], -1.0, epsilon = 1e-12);
    }
}
