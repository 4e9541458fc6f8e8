//! Brute-force primal oracle for the Lagrangian penalty problem
//!
//! `sup_P E_P[L] − ρ UW(P‖P̂)` over distributions `P` supported on a finite
//! grid. Writing `UW` through its coupling turns the problem into a concave
//! maximization over joint couplings `γ` (grid × atoms, total mass one):
//!
//! `Σ_kj γ_kj (L_k − ρ c_kj) − ρβ KL(γᵀ1 ‖ q)`
//!
//! which is solved by entropic mirror ascent with step `1/(ρβ)`.

use crate::distribution::{kl_divergence, DiscreteDistribution};
use crate::error::{Error, Result};
use crate::model::{adjusted_loss, transport_cost, OutlierScore, Sample};

use super::HyperParams;

pub const GRID_ASCENT_ITERS: usize = 20_000;

fn log_sum_exp(xs: impl Iterator<Item = f64> + Clone) -> f64 {
    let m = xs.clone().fold(f64::NEG_INFINITY, f64::max);
    if m == f64::NEG_INFINITY {
        return m;
    }
    m + xs.map(|x| (x - m).exp()).sum::<f64>().ln()
}

/// Attained value of the grid-restricted primal problem. Every returned
/// value is the objective of a feasible coupling, hence a lower bound on the
/// unrestricted supremum.
pub fn primal_sup_on_grid(
    theta: &[f64],
    p_hat: &DiscreteDistribution,
    hp: &HyperParams,
    score: &OutlierScore,
    grid: &[Sample],
) -> Result<f64> {
    if grid.is_empty() {
        return Err(Error::invalid("empty grid"));
    }
    let temp = hp.temperature();
    let losses: Vec<f64> = grid
        .iter()
        .map(|g| adjusted_loss(theta, g, score))
        .collect::<Result<_>>()?;
    let q = p_hat.weights();
    let cols = p_hat.len();

    // Per column: feasible grid indices and their payoffs L_k − ρ c_kj.
    let mut payoff: Vec<Vec<(usize, f64)>> = Vec::with_capacity(cols);
    for (zeta, &qj) in p_hat.atoms().iter().zip(q) {
        let mut col = Vec::new();
        if qj > 0.0 {
            for (k, g) in grid.iter().enumerate() {
                let c = transport_cost(g, zeta)?;
                if c.is_finite() {
                    col.push((k, losses[k] - hp.rho * c));
                }
            }
        }
        payoff.push(col);
    }
    if payoff.iter().all(Vec::is_empty) {
        return Err(Error::invalid("no grid point shares a label with the data"));
    }

    // log γ, initialized to q_j spread uniformly over the column.
    let mut log_gamma: Vec<Vec<f64>> = payoff
        .iter()
        .zip(q)
        .map(|(col, &qj)| vec![qj.ln() - (col.len() as f64).ln(); col.len()])
        .collect();
    normalize(&mut log_gamma);

    for _ in 0..GRID_ASCENT_ITERS {
        for ((lg, col), &qj) in log_gamma.iter_mut().zip(&payoff).zip(q) {
            if col.is_empty() {
                continue;
            }
            let log_b = log_sum_exp(lg.iter().copied());
            for (l, &(_, a)) in lg.iter_mut().zip(col) {
                *l += a / temp - log_b + qj.ln();
            }
        }
        normalize(&mut log_gamma);
    }

    let mut value = 0.0;
    let mut b = vec![0.0; cols];
    for (j, (lg, col)) in log_gamma.iter().zip(&payoff).enumerate() {
        for (l, &(_, a)) in lg.iter().zip(col) {
            let g = l.exp();
            value += g * a;
            b[j] += g;
        }
    }
    Ok(value - temp * kl_divergence(&b, q))
}

fn normalize(log_gamma: &mut [Vec<f64>]) {
    let total = log_sum_exp(log_gamma.iter().flatten().copied());
    log_gamma
        .iter_mut()
        .flatten()
        .for_each(|l| *l -= total);
}
