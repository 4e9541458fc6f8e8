use serde::{Deserialize, Serialize};

use crate::distribution::{kl_divergence, DiscreteDistribution};
use crate::error::{Error, Result};
use crate::federation::MixtureWeights;
use crate::model::{adjusted_loss, transport_cost, OutlierScore};

use super::{inner_maximize, mixture_distribution, HyperParams};

/// Worst-case distribution of the penalized problem and the induced
/// robustness radius.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CertificateReport {
    pub worst_case: DiscreteDistribution,
    /// `r̂ = UW(P*‖P̂_λ)` realized by the pushforward coupling.
    pub induced_radius: f64,
    /// `ρβ log E_{P̂_λ}[exp(f/(ρβ))]`
    pub dual_value: f64,
    /// `E_{P*}[L]`
    pub robust_value: f64,
    /// `ρ r̂ + dual_value`
    pub bound: f64,
}

const IDENTITY_TOL: f64 = 1e-9;

/// Pushes each atom of `P̂_λ` to its inner maximizer and reweights by the
/// exponential tilt `q_j exp(f_j/(ρβ))`.
pub fn robustness_certificate(
    theta: &[f64],
    lambda: &MixtureWeights,
    clients: &[DiscreteDistribution],
    hp: &HyperParams,
    score: &OutlierScore,
) -> Result<CertificateReport> {
    let mixture = mixture_distribution(lambda, clients)?;
    let temp = hp.temperature();
    let q = mixture.weights();

    let mut atoms = Vec::with_capacity(mixture.len());
    let mut f = Vec::with_capacity(mixture.len());
    let mut costs = Vec::with_capacity(mixture.len());
    for zeta in mixture.atoms() {
        let r = inner_maximize(theta, zeta, hp, score)?;
        costs.push(transport_cost(&r.maximizer, zeta)?);
        f.push(r.value);
        atoms.push(r.maximizer);
    }

    let shift = f.iter().map(|v| v / temp).fold(f64::NEG_INFINITY, f64::max);
    let tilted: Vec<f64> = f
        .iter()
        .zip(q)
        .map(|(v, qj)| qj * (v / temp - shift).exp())
        .collect();
    let z: f64 = tilted.iter().sum();
    let w: Vec<f64> = tilted.iter().map(|t| t / z).collect();

    let induced_radius =
        w.iter().zip(&costs).map(|(wj, c)| wj * c).sum::<f64>() + hp.beta * kl_divergence(&w, q);
    let dual_value = temp * (shift + z.ln());
    let mut robust_value = 0.0;
    for (x, wj) in atoms.iter().zip(&w) {
        robust_value += wj * adjusted_loss(theta, x, score)?;
    }
    let bound = hp.rho * induced_radius + dual_value;
    if (robust_value - bound).abs() > IDENTITY_TOL * bound.abs().max(1.0) {
        return Err(Error::invalid(format!(
            "certificate identity violated: E[L] = {robust_value}, bound = {bound}"
        )));
    }
    Ok(CertificateReport {
        worst_case: DiscreteDistribution::new(atoms, w)?,
        induced_radius: induced_radius.max(0.0),
        dual_value,
        robust_value,
        bound,
    })
}
