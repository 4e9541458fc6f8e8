//! Outlier-robust distributionally robust federated learning.
//!
//! The adversary may transport each client's samples (at squared-distance
//! cost) and reweight them (at KL cost), and is discouraged from producing
//! outliers by a prior-knowledge score subtracted from the loss. Training
//! solves the resulting min–max–max problem through its exponentially
//! tilted dual with federated stochastic gradient descent–ascent.

pub mod baselines;
pub mod datasets;
pub mod distribution;
pub mod dro;
pub mod error;
pub mod experiment;
pub mod federation;
pub mod model;
pub mod verify;

pub use distribution::{kl_divergence, DiscreteDistribution};
pub use dro::HyperParams;
pub use error::{Error, Result};
pub use federation::MixtureWeights;
pub use model::{Label, ModelParams, OutlierScore, Sample};
