//! Common prediction surface shared by all regressor families.

use serde::{Deserialize, Serialize};

use crate::error::Result;

/// Posterior prediction at a single query point.
///
/// For the weighted-average predictors (LGP, MSGP) the variance is the
/// distance-weighted average of the member variances; it is a diagnostic
/// heuristic, not a calibrated posterior variance.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct Prediction {
    pub mean: f64,
    pub variance: f64,
}

/// A trained single-output regressor.
pub trait Regressor {
    /// Input dimension the model was trained on.
    fn input_dim(&self) -> usize;

    /// Posterior prediction at `x`.
    fn predict(&self, x: &[f64]) -> Result<Prediction>;

    /// Predictive mean only, where that is cheaper than a full prediction.
    fn predict_mean(&self, x: &[f64]) -> Result<f64> {
        Ok(self.predict(x)?.mean)
    }
}
