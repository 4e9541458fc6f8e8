use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::norm;

const SIMPLEX_TOL: f64 = 1e-12;

/// Point of the probability simplex weighting the clients.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MixtureWeights(Vec<f64>);

impl MixtureWeights {
    pub fn new(lambda: Vec<f64>) -> Result<Self> {
        if lambda.is_empty() {
            return Err(Error::invalid("mixture weights are empty"));
        }
        if lambda.iter().any(|l| !(l.is_finite() && *l >= 0.0)) {
            return Err(Error::invalid("mixture weights must be finite and nonnegative"));
        }
        let total: f64 = lambda.iter().sum();
        if (total - 1.0).abs() > SIMPLEX_TOL {
            return Err(Error::invalid(format!("mixture weights sum to {total}")));
        }
        Ok(Self(lambda))
    }

    pub fn uniform(n: usize) -> Result<Self> {
        if n == 0 {
            return Err(Error::invalid("no clients"));
        }
        Ok(Self(vec![1.0 / n as f64; n]))
    }

    /// Weights proportional to the given positive counts.
    pub fn proportional(counts: &[usize]) -> Result<Self> {
        let total: usize = counts.iter().sum();
        if counts.is_empty() || total == 0 {
            return Err(Error::invalid("no samples to weight"));
        }
        Self::new(counts.iter().map(|&c| c as f64 / total as f64).collect())
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}

/// Euclidean projection onto `{x ≥ 0, Σx = total}` by the sort-and-threshold
/// rule. `total = 0` yields the zero vector.
pub(crate) fn project_scaled_simplex(v: &[f64], total: f64) -> Vec<f64> {
    if v.is_empty() {
        return Vec::new();
    }
    if total <= 0.0 {
        return vec![0.0; v.len()];
    }
    let mut sorted = v.to_vec();
    sorted.sort_by(|a, b| b.total_cmp(a));
    let mut cumsum = 0.0;
    let mut tau = 0.0;
    for (k, &u) in sorted.iter().enumerate() {
        cumsum += u;
        let t = (cumsum - total) / (k + 1) as f64;
        if u - t > 0.0 {
            tau = t;
        }
    }
    v.iter().map(|&x| (x - tau).max(0.0)).collect()
}

/// Euclidean projection onto the probability simplex.
pub fn project_simplex(v: &[f64]) -> Result<MixtureWeights> {
    if v.is_empty() {
        return Err(Error::invalid("cannot project an empty vector"));
    }
    if v.iter().any(|x| !x.is_finite()) {
        return Err(Error::invalid("cannot project a non-finite vector"));
    }
    let mut x = project_scaled_simplex(v, 1.0);
    // Absorb rounding residue so the result is on the simplex to 1e-12.
    let total: f64 = x.iter().sum();
    if total != 1.0 {
        x.iter_mut().for_each(|xi| *xi /= total);
    }
    MixtureWeights::new(x)
}

/// Radial projection onto the ball `‖θ‖ ≤ radius`.
pub fn project_ball(theta: &[f64], radius: f64) -> Vec<f64> {
    let n = norm(theta);
    if n <= radius {
        theta.to_vec()
    } else {
        theta.iter().map(|t| t * radius / n).collect()
    }
}
