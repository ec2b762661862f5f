//! Training data container: an `n x d` input matrix plus one scalar target
//! per row.

use nalgebra::{DMatrix, DVector};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Dataset {
    inputs: DMatrix<f64>,
    targets: DVector<f64>,
}

impl Dataset {
    pub fn new(inputs: DMatrix<f64>, targets: DVector<f64>) -> Result<Self> {
        if inputs.nrows() == 0 {
            return Err(Error::EmptyDataset);
        }
        if inputs.nrows() != targets.len() {
            return Err(Error::DimensionMismatch {
                expected: inputs.nrows(),
                got: targets.len(),
            });
        }
        if targets.iter().any(|t| !t.is_finite()) || inputs.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidConfig("dataset contains non-finite values".into()));
        }
        Ok(Self { inputs, targets })
    }

    pub fn n(&self) -> usize {
        self.inputs.nrows()
    }

    pub fn dim(&self) -> usize {
        self.inputs.ncols()
    }

    pub fn inputs(&self) -> &DMatrix<f64> {
        &self.inputs
    }

    pub fn targets(&self) -> &DVector<f64> {
        &self.targets
    }

    pub fn row(&self, i: usize) -> Vec<f64> {
        self.inputs.row(i).iter().copied().collect()
    }

    /// Sub-dataset addressed by row indices (kept in the given order).
    pub fn select(&self, indices: &[usize]) -> Result<Self> {
        if indices.is_empty() {
            return Err(Error::EmptyDataset);
        }
        let d = self.dim();
        let mut inputs = DMatrix::zeros(indices.len(), d);
        let mut targets = DVector::zeros(indices.len());
        for (r, &i) in indices.iter().enumerate() {
            inputs.row_mut(r).copy_from(&self.inputs.row(i));
            targets[r] = self.targets[i];
        }
        Ok(Self { inputs, targets })
    }

    /// Uniform random subsample without replacement, deterministic in `seed`.
    /// Returns the whole dataset (original order) when `size >= n`.
    pub fn subsample(&self, size: usize, seed: u64) -> Result<Self> {
        if size == 0 {
            return Err(Error::EmptyDataset);
        }
        if size >= self.n() {
            return Ok(self.clone());
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut idx = rand::seq::index::sample(&mut rng, self.n(), size).into_vec();
        idx.sort_unstable();
        self.select(&idx)
    }

    /// Per-dimension standard deviation of the inputs; zero-variance
    /// dimensions report 1 so they can be used as length-scale seeds.
    pub fn input_scales(&self) -> Vec<f64> {
        let n = self.n() as f64;
        (0..self.dim())
            .map(|j| {
                let col = self.inputs.column(j);
                let mean = col.sum() / n;
                let var = col.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n;
                let s = var.sqrt();
                if s > 1e-12 {
                    s
                } else {
                    1.0
                }
            })
            .collect()
    }

    /// Target variance (population).
    pub fn target_variance(&self) -> f64 {
        let n = self.n() as f64;
        let mean = self.targets.sum() / n;
        self.targets.iter().map(|y| (y - mean) * (y - mean)).sum::<f64>() / n
    }
}
