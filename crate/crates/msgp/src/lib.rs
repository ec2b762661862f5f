//! Gaussian process regression for control-oriented model learning.
//!
//! Four regressor families share one squared-exponential kernel:
//!
//! * [`gp`] — exact GP with Cholesky caching and marginal-likelihood fitting,
//! * [`spgp`] — sparse pseudo-input GP (FITC) with joint optimization of
//!   hyperparameters and pseudo-input locations,
//! * [`lgp`] — local GPs on a partition of the data, blended by
//!   Gaussian-kernel distance weights,
//! * [`msgp`] — multi-sparse GP: one FITC model per cluster, each with its
//!   own hyperparameters and pseudo-inputs, combined by weighted averaging
//!   over the nearest clusters.
//!
//! Models are immutable once fitted; predictions are read-only and safe to
//! run concurrently.

pub mod archive;
pub mod cluster;
pub mod dataset;
pub mod error;
pub mod gp;
pub mod kernel;
pub mod linalg;
pub mod lgp;
#[allow(clippy::module_inception)]
pub mod msgp;
pub mod opt;
pub mod predict;
pub mod spgp;

pub use dataset::Dataset;
pub use error::{Error, Result};
pub use kernel::Hyperparameters;
pub use predict::{Prediction, Regressor};
