use rayon::prelude::*;

use crate::distribution::DiscreteDistribution;
use crate::error::{Error, Result};
use crate::federation::MixtureWeights;
use crate::model::{adjusted_loss_grad_theta, OutlierScore, Sample};

use super::{inner_maximize, HyperParams};

/// `exp(value / (ρβ))`
#[inline]
pub fn tilt(value: f64, hp: &HyperParams) -> f64 {
    (value / hp.temperature()).exp()
}

/// `g^θ = exp((L(θ,z) − ρc(z,ζ))/(ρβ)) · ∇_θ L(θ,z) / (ρβ)` at the inner maximizer `z`.
pub fn grad_theta_estimate(
    theta: &[f64],
    zeta: &Sample,
    hp: &HyperParams,
    score: &OutlierScore,
) -> Result<Vec<f64>> {
    let r = inner_maximize(theta, zeta, hp, score)?;
    let w = tilt(r.value, hp) / hp.temperature();
    let mut g = adjusted_loss_grad_theta(theta, &r.maximizer)?;
    g.iter_mut().for_each(|v| *v *= w);
    Ok(g)
}

/// `g^λ = exp((L(θ,z) − ρc(z,ζ))/(ρβ))`
pub fn grad_lambda_estimate(
    theta: &[f64],
    zeta: &Sample,
    hp: &HyperParams,
    score: &OutlierScore,
) -> Result<f64> {
    Ok(tilt(inner_maximize(theta, zeta, hp, score)?.value, hp))
}

/// `E_{ζ∼P̂_i}[exp(f(θ,ζ)/(ρβ))]`, the client's coordinate of `∇_λ H`.
///
/// Inner maximizations run in parallel; the reduction is sequential in atom
/// order so the result does not depend on scheduling.
pub fn client_tilt_mean(
    theta: &[f64],
    data: &DiscreteDistribution,
    hp: &HyperParams,
    score: &OutlierScore,
) -> Result<f64> {
    let terms: Vec<f64> = data
        .atoms()
        .par_iter()
        .zip(data.weights().par_iter())
        .map(|(s, &w)| -> Result<f64> {
            if w == 0.0 {
                return Ok(0.0);
            }
            Ok(w * tilt(inner_maximize(theta, s, hp, score)?.value, hp))
        })
        .collect::<Result<_>>()?;
    Ok(terms.iter().sum())
}

/// `H(θ, λ) = Σ_i λ_i E_{P̂_i}[exp(f(θ,ζ)/(ρβ))]`
pub fn dual_objective_h(
    theta: &[f64],
    lambda: &MixtureWeights,
    clients: &[DiscreteDistribution],
    hp: &HyperParams,
    score: &OutlierScore,
) -> Result<f64> {
    if clients.is_empty() {
        return Err(Error::invalid("no client datasets"));
    }
    if lambda.len() != clients.len() {
        return Err(Error::invalid(format!(
            "{} mixture weights for {} clients",
            lambda.len(),
            clients.len()
        )));
    }
    let mut total = 0.0;
    for (&li, data) in lambda.as_slice().iter().zip(clients) {
        if li > 0.0 {
            total += li * client_tilt_mean(theta, data, hp, score)?;
        }
    }
    Ok(total)
}

/// `P̂_λ = Σ_i λ_i P̂_i`, keeping only atoms with positive weight.
pub fn mixture_distribution(
    lambda: &MixtureWeights,
    clients: &[DiscreteDistribution],
) -> Result<DiscreteDistribution> {
    if clients.is_empty() || lambda.len() != clients.len() {
        return Err(Error::invalid("mixture weights do not match the clients"));
    }
    let mut atoms = Vec::new();
    let mut weights = Vec::new();
    for (&li, data) in lambda.as_slice().iter().zip(clients) {
        for (s, w) in data.iter() {
            if li * w > 0.0 {
                atoms.push(s.clone());
                weights.push(li * w);
            }
        }
    }
    DiscreteDistribution::from_unnormalized(atoms, weights)
}
