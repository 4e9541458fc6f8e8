use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::Sample;

const WEIGHT_SUM_TOL: f64 = 1e-12;

/// Finitely supported probability distribution over samples.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DiscreteDistribution {
    atoms: Vec<Sample>,
    weights: Vec<f64>,
}

impl DiscreteDistribution {
    pub fn new(atoms: Vec<Sample>, weights: Vec<f64>) -> Result<Self> {
        if atoms.is_empty() {
            return Err(Error::invalid("distribution has no atoms"));
        }
        if atoms.len() != weights.len() {
            return Err(Error::invalid(format!(
                "{} atoms but {} weights",
                atoms.len(),
                weights.len()
            )));
        }
        if weights.iter().any(|w| !(w.is_finite() && *w >= 0.0)) {
            return Err(Error::invalid("weights must be finite and nonnegative"));
        }
        let total: f64 = weights.iter().sum();
        if (total - 1.0).abs() > WEIGHT_SUM_TOL {
            return Err(Error::invalid(format!("weights sum to {total}, not 1")));
        }
        let dim = atoms[0].dim();
        if let Some(bad) = atoms.iter().find(|a| a.dim() != dim) {
            return Err(Error::DimensionMismatch {
                expected: dim,
                found: bad.dim(),
            });
        }
        Ok(Self { atoms, weights })
    }

    /// Uniform weights over the given samples.
    pub fn uniform(atoms: Vec<Sample>) -> Result<Self> {
        let n = atoms.len();
        if n == 0 {
            return Err(Error::invalid("empty dataset"));
        }
        Self::new(atoms, vec![1.0 / n as f64; n])
    }

    /// Rescales nonnegative weights to sum to one.
    pub fn from_unnormalized(atoms: Vec<Sample>, weights: Vec<f64>) -> Result<Self> {
        let total: f64 = weights.iter().sum();
        if !(total > 0.0 && total.is_finite()) {
            return Err(Error::invalid("weights must have positive finite total"));
        }
        let weights = weights.into_iter().map(|w| w / total).collect();
        Self::new(atoms, weights)
    }

    pub fn atoms(&self) -> &[Sample] {
        &self.atoms
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn len(&self) -> usize {
        self.atoms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.atoms.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.atoms[0].dim()
    }

    pub fn iter(&self) -> impl Iterator<Item = (&Sample, f64)> {
        self.atoms.iter().zip(self.weights.iter().copied())
    }

    /// Expectation of `f` under the distribution.
    pub fn expect<F>(&self, mut f: F) -> Result<f64>
    where
        F: FnMut(&Sample) -> Result<f64>,
    {
        let mut acc = 0.0;
        for (s, w) in self.iter() {
            if w > 0.0 {
                acc += w * f(s)?;
            }
        }
        Ok(acc)
    }
}

/// `Σ p log(p/q)` with `0 · log 0 = 0`. Infinite if `p` puts mass where `q`
/// has none.
pub fn kl_divergence(p: &[f64], q: &[f64]) -> f64 {
    p.iter()
        .zip(q)
        .map(|(&pi, &qi)| {
            if pi <= 0.0 {
                0.0
            } else if qi <= 0.0 {
                f64::INFINITY
            } else {
                pi * (pi / qi).ln()
            }
        })
        .sum()
}
