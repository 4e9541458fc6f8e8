use std::fmt::Write as _;
use std::time::Instant;

use rayon::prelude::*;

use crate::distribution::DiscreteDistribution;
use crate::dro::{client_tilt_mean, HyperParams};
use crate::error::{Error, Result};
use crate::model::{norm, OutlierScore};

use super::client::{client_round, ClientState, ClientUpdate, DorflEstimator, LocalEstimator};
use super::projection::{project_ball, project_simplex, MixtureWeights};

/// `θ_{t+1} = Proj_Θ(Σ λ_i θ_{i,t+1})`, `λ_{t+1} = Proj_Λ(λ_t + η_λ g^λ)`.
pub fn server_aggregate(
    updates: &[ClientUpdate],
    lambda: &MixtureWeights,
    hp: &HyperParams,
) -> Result<(Vec<f64>, MixtureWeights)> {
    if updates.len() != lambda.len() || updates.is_empty() {
        return Err(Error::invalid(format!(
            "{} client updates for {} mixture weights",
            updates.len(),
            lambda.len()
        )));
    }
    let dim = updates[0].theta_local.len();
    let mut avg = vec![0.0; dim];
    for (u, &l) in updates.iter().zip(lambda.as_slice()) {
        if u.theta_local.len() != dim {
            return Err(Error::DimensionMismatch {
                expected: dim,
                found: u.theta_local.len(),
            });
        }
        for (a, t) in avg.iter_mut().zip(&u.theta_local) {
            *a += l * t;
        }
    }
    let theta = project_ball(&avg, hp.radius);
    let ascent: Vec<f64> = updates
        .iter()
        .zip(lambda.as_slice())
        .map(|(u, l)| l + hp.eta_lambda * u.g_lambda)
        .collect();
    Ok((theta, project_simplex(&ascent)?))
}

#[derive(Debug, Clone, PartialEq)]
pub struct RoundRecord {
    /// 1-based round index `t`; the record holds `θ_t` and `λ_t`.
    pub round: usize,
    pub theta: Vec<f64>,
    pub lambda: Vec<f64>,
    pub g_lambda: Vec<f64>,
    /// Worst-client objective at the running average, when monitored.
    pub gap_surrogate: Option<f64>,
    /// Wall time since training started. Not reproducible.
    pub seconds: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainingTrace {
    pub method: String,
    pub rounds: Vec<RoundRecord>,
    /// Mean of `θ_1, …, θ_T`.
    pub theta_bar: Vec<f64>,
}

impl TrainingTrace {
    pub fn final_theta(&self) -> &[f64] {
        &self.rounds.last().expect("trace has rounds").theta
    }

    pub fn final_lambda(&self) -> &[f64] {
        &self.rounds.last().expect("trace has rounds").lambda
    }

    /// One CSV row per round: `round, theta_norm, lambda_1..N, gap_surrogate,
    /// seconds`, preceded by a `method` column when requested.
    pub fn to_csv(&self, with_method: bool) -> String {
        let n = self.rounds.first().map_or(0, |r| r.lambda.len());
        let mut out = String::new();
        if with_method {
            out.push_str("method,");
        }
        out.push_str("round,theta_norm");
        for i in 1..=n {
            let _ = write!(out, ",lambda_{i}");
        }
        out.push_str(",gap_surrogate,seconds\n");
        for r in &self.rounds {
            if with_method {
                let _ = write!(out, "{},", self.method);
            }
            let _ = write!(out, "{},{}", r.round, norm(&r.theta));
            for l in &r.lambda {
                let _ = write!(out, ",{l}");
            }
            match r.gap_surrogate {
                Some(g) => {
                    let _ = write!(out, ",{g}");
                }
                None => out.push(','),
            }
            let _ = writeln!(out, ",{}", r.seconds);
        }
        out
    }
}

/// Largest per-client mean of the estimator's sample objective.
pub fn worst_client_objective<E: LocalEstimator + ?Sized>(
    theta: &[f64],
    clients: &[DiscreteDistribution],
    hp: &HyperParams,
    estimator: &E,
) -> Result<f64> {
    let mut best = f64::NEG_INFINITY;
    for data in clients {
        let terms: Vec<f64> = data
            .atoms()
            .par_iter()
            .zip(data.weights().par_iter())
            .map(|(s, &w)| Ok(w * estimator.sample_value(theta, s, hp)?))
            .collect::<Result<_>>()?;
        best = best.max(terms.iter().sum());
    }
    Ok(best)
}

/// `max_λ H(θ, λ)`: since `H` is linear in `λ`, the maximum sits at the
/// vertex of the client with the largest tilted mean.
pub fn duality_gap_surrogate(
    theta: &[f64],
    clients: &[DiscreteDistribution],
    hp: &HyperParams,
    score: &OutlierScore,
) -> Result<f64> {
    if clients.is_empty() {
        return Err(Error::invalid("no client datasets"));
    }
    let mut best = f64::NEG_INFINITY;
    for data in clients {
        best = best.max(client_tilt_mean(theta, data, hp, score)?);
    }
    Ok(best)
}

/// Synchronous rounds of local steps and server aggregation from `θ_0 = 0`
/// and the given `λ_0`.
pub fn run_training_with<E: LocalEstimator + ?Sized>(
    clients: &[ClientState],
    hp: &HyperParams,
    estimator: &E,
    lambda0: MixtureWeights,
) -> Result<TrainingTrace> {
    hp.validate()?;
    if clients.is_empty() {
        return Err(Error::invalid("training needs at least one client"));
    }
    if lambda0.len() != clients.len() {
        return Err(Error::invalid("initial mixture does not match the clients"));
    }
    let dim = clients[0].data.dim();
    if let Some(c) = clients.iter().find(|c| c.data.dim() != dim) {
        return Err(Error::DimensionMismatch {
            expected: dim,
            found: c.data.dim(),
        });
    }
    let datasets: Vec<DiscreteDistribution> = clients.iter().map(|c| c.data.clone()).collect();

    let start = Instant::now();
    let mut theta = vec![0.0; dim];
    let mut lambda = lambda0;
    let mut theta_sum = vec![0.0; dim];
    let mut rounds = Vec::with_capacity(hp.rounds);
    for t in 0..hp.rounds {
        let updates: Vec<ClientUpdate> = clients
            .par_iter()
            .map(|c| client_round(c, t, &theta, hp, estimator))
            .collect::<Result<_>>()?;
        let (theta_next, lambda_next) = server_aggregate(&updates, &lambda, hp)?;
        theta = theta_next;
        if estimator.updates_lambda() {
            lambda = lambda_next;
        }
        for (s, v) in theta_sum.iter_mut().zip(&theta) {
            *s += v;
        }
        let round = t + 1;
        let monitored = hp.monitor_every > 0 && (round % hp.monitor_every == 0 || round == hp.rounds);
        let gap_surrogate = if monitored {
            let avg: Vec<f64> = theta_sum.iter().map(|s| s / round as f64).collect();
            Some(worst_client_objective(&avg, &datasets, hp, estimator)?)
        } else {
            None
        };
        rounds.push(RoundRecord {
            round,
            theta: theta.clone(),
            lambda: lambda.as_slice().to_vec(),
            g_lambda: updates.iter().map(|u| u.g_lambda).collect(),
            gap_surrogate,
            seconds: start.elapsed().as_secs_f64(),
        });
    }
    let theta_bar = theta_sum.iter().map(|s| s / hp.rounds as f64).collect();
    Ok(TrainingTrace {
        method: estimator.name().to_string(),
        rounds,
        theta_bar,
    })
}

/// DOR-FL training with `λ_0` uniform.
pub fn run_training(
    datasets: &[DiscreteDistribution],
    hp: &HyperParams,
    score: &OutlierScore,
    seed: u64,
) -> Result<TrainingTrace> {
    let clients = ClientState::from_datasets(datasets.to_vec(), seed);
    let estimator = DorflEstimator {
        score: score.clone(),
    };
    run_training_with(&clients, hp, &estimator, MixtureWeights::uniform(clients.len())?)
}
