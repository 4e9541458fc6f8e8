//! Deterministic full-batch solver for `min_θ max_λ H(θ, λ)`, used as the
//! floor when monitoring the convergence of stochastic training.
//!
//! `H` is linear in `λ` and convex in `θ`, so the value equals
//! `max_λ g(λ)` with `g(λ) = min_θ H(θ, λ)`. The solver alternates an exact
//! (projected gradient) minimization in `θ` with projected ascent in `λ`;
//! every iterate brackets the value between `g(λ) = Σ λ_i H_i(θ*)` and
//! `max_i H_i(θ*)`.

use rayon::prelude::*;

use crate::distribution::DiscreteDistribution;
use crate::dro::{inner_maximize, tilt, HyperParams};
use crate::error::{Error, Result};
use crate::model::{adjusted_loss_grad_theta, norm, OutlierScore};

use super::projection::{project_ball, project_simplex, MixtureWeights};

const THETA_ITERS: usize = 2_000;
const LAMBDA_ITERS: usize = 400;

#[derive(Debug, Clone)]
pub struct MinimaxReference {
    /// Best upper bound `max_i H_i(θ)` found.
    pub value: f64,
    /// Best lower bound `g(λ)` found.
    pub lower: f64,
    pub theta: Vec<f64>,
    pub lambda: MixtureWeights,
}

/// Per-client full-batch `H_i(θ)` and `∇H_i(θ)`.
fn client_terms(
    theta: &[f64],
    clients: &[DiscreteDistribution],
    hp: &HyperParams,
    score: &OutlierScore,
) -> Result<Vec<(f64, Vec<f64>)>> {
    clients
        .iter()
        .map(|data| {
            let terms: Vec<(f64, Vec<f64>)> = data
                .atoms()
                .par_iter()
                .zip(data.weights().par_iter())
                .map(|(s, &w)| {
                    let r = inner_maximize(theta, s, hp, score)?;
                    let e = tilt(r.value, hp);
                    let mut g = adjusted_loss_grad_theta(theta, &r.maximizer)?;
                    g.iter_mut().for_each(|v| *v *= w * e / hp.temperature());
                    Ok((w * e, g))
                })
                .collect::<Result<_>>()?;
            let mut value = 0.0;
            let mut grad = vec![0.0; theta.len()];
            for (v, g) in terms {
                value += v;
                grad.iter_mut().zip(&g).for_each(|(a, b)| *a += b);
            }
            Ok((value, grad))
        })
        .collect()
}

fn weighted(terms: &[(f64, Vec<f64>)], lambda: &[f64]) -> (f64, Vec<f64>) {
    let mut value = 0.0;
    let mut grad = vec![0.0; terms[0].1.len()];
    for ((v, g), &l) in terms.iter().zip(lambda) {
        value += l * v;
        grad.iter_mut().zip(g).for_each(|(a, b)| *a += l * b);
    }
    (value, grad)
}

/// Minimizes `Σ λ_i H_i` over the ball by projected gradient descent with
/// backtracking, warm-started at `theta`. Points where the inner solver
/// rejects `ρ` count as failed steps.
fn minimize_theta(
    theta: &[f64],
    lambda: &[f64],
    clients: &[DiscreteDistribution],
    hp: &HyperParams,
    score: &OutlierScore,
    step: &mut f64,
) -> Result<(Vec<f64>, Vec<(f64, Vec<f64>)>)> {
    let mut x = theta.to_vec();
    let mut terms = client_terms(&x, clients, hp, score)?;
    for _ in 0..THETA_ITERS {
        let (fx, gx) = weighted(&terms, lambda);
        loop {
            let trial: Vec<f64> = x.iter().zip(&gx).map(|(a, g)| a - *step * g).collect();
            let cand = project_ball(&trial, hp.radius);
            let diff: Vec<f64> = cand.iter().zip(&x).map(|(a, b)| a - b).collect();
            let dn = norm(&diff);
            if dn <= 1e-13 * (1.0 + norm(&x)) {
                return Ok((x, terms));
            }
            let accepted = match client_terms(&cand, clients, hp, score) {
                Ok(t) => {
                    let (fc, _) = weighted(&t, lambda);
                    let lin: f64 = diff.iter().zip(&gx).map(|(d, g)| d * g).sum();
                    (fc <= fx + lin + dn * dn / (2.0 * *step)).then_some(t)
                }
                Err(Error::Config(_)) => None,
                Err(e) => return Err(e),
            };
            match accepted {
                Some(t) => {
                    x = cand;
                    terms = t;
                    *step *= 1.5;
                    break;
                }
                None => *step *= 0.5,
            }
            if *step < 1e-16 {
                return Ok((x, terms));
            }
        }
    }
    Ok((x, terms))
}

/// Brackets `min_θ max_i H_i(θ)` to within `tol` (or the iteration budget).
pub fn minimax_reference(
    clients: &[DiscreteDistribution],
    hp: &HyperParams,
    score: &OutlierScore,
    tol: f64,
) -> Result<MinimaxReference> {
    if clients.is_empty() {
        return Err(Error::invalid("no client datasets"));
    }
    let dim = clients[0].dim();
    let mut lambda = MixtureWeights::uniform(clients.len())?;
    let mut theta_step = 1.0;
    let (mut theta, mut terms) =
        minimize_theta(&vec![0.0; dim], lambda.as_slice(), clients, hp, score, &mut theta_step)?;
    let mut g = weighted(&terms, lambda.as_slice()).0;
    let mut best = MinimaxReference {
        value: terms.iter().map(|t| t.0).fold(f64::NEG_INFINITY, f64::max),
        lower: g,
        theta: theta.clone(),
        lambda: lambda.clone(),
    };
    let mut step = 1.0;
    for _ in 0..LAMBDA_ITERS {
        if best.value - best.lower <= tol {
            break;
        }
        let h: Vec<f64> = terms.iter().map(|t| t.0).collect();
        let ascent: Vec<f64> = lambda
            .as_slice()
            .iter()
            .zip(&h)
            .map(|(l, hi)| l + step * hi)
            .collect();
        let cand = project_simplex(&ascent)?;
        let (cand_theta, cand_terms) =
            minimize_theta(&theta, cand.as_slice(), clients, hp, score, &mut theta_step)?;
        let cand_g = weighted(&cand_terms, cand.as_slice()).0;
        let upper = cand_terms.iter().map(|t| t.0).fold(f64::NEG_INFINITY, f64::max);
        if upper < best.value {
            best.value = upper;
            best.theta = cand_theta.clone();
        }
        if cand_g >= g {
            lambda = cand;
            theta = cand_theta;
            terms = cand_terms;
            g = cand_g;
            if g > best.lower {
                best.lower = g;
                best.lambda = lambda.clone();
            }
            step *= 1.5;
        } else {
            step *= 0.5;
            if step < 1e-14 {
                break;
            }
        }
    }
    Ok(best)
}
