use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::distribution::DiscreteDistribution;
use crate::dro::{inner_maximize, tilt, HyperParams};
use crate::error::{Error, Result};
use crate::model::{adjusted_loss_grad_theta, OutlierScore, Sample};

/// Per-sample stochastic estimators used by a client during one round.
///
/// DOR-FL and every baseline share the federation loop and differ only in
/// these estimators and in whether the server ascends `λ`.
pub trait LocalEstimator: Sync {
    /// Short method name written into traces and reports.
    fn name(&self) -> &str;

    /// `(g^θ, g^λ)` at one sample.
    fn estimate(&self, theta: &[f64], zeta: &Sample, hp: &HyperParams) -> Result<(Vec<f64>, f64)>;

    /// Whether the server takes projected ascent steps on `λ`.
    fn updates_lambda(&self) -> bool;

    /// Per-sample objective whose client mean is the coordinate of the
    /// linear-in-`λ` outer objective. Defaults to `g^λ`.
    fn sample_value(&self, theta: &[f64], zeta: &Sample, hp: &HyperParams) -> Result<f64> {
        Ok(self.estimate(theta, zeta, hp)?.1)
    }
}

/// DOR-FL's tilted estimators at the inner maximizer.
#[derive(Debug, Clone)]
pub struct DorflEstimator {
    pub score: OutlierScore,
}

impl LocalEstimator for DorflEstimator {
    fn name(&self) -> &str {
        "dorfl"
    }

    fn estimate(&self, theta: &[f64], zeta: &Sample, hp: &HyperParams) -> Result<(Vec<f64>, f64)> {
        let r = inner_maximize(theta, zeta, hp, &self.score)?;
        let g_lambda = tilt(r.value, hp);
        let w = g_lambda / hp.temperature();
        let mut g = adjusted_loss_grad_theta(theta, &r.maximizer)?;
        g.iter_mut().for_each(|v| *v *= w);
        Ok((g, g_lambda))
    }

    fn updates_lambda(&self) -> bool {
        true
    }
}

/// A simulated client: its empirical distribution and a private random stream.
#[derive(Debug, Clone)]
pub struct ClientState {
    pub client_id: usize,
    pub data: DiscreteDistribution,
    rng: ChaCha8Rng,
}

impl ClientState {
    /// Stream key derived from `(global_seed, client_id)`; each round then
    /// reads its own stream so draws do not depend on scheduling.
    pub fn new(client_id: usize, data: DiscreteDistribution, global_seed: u64) -> Self {
        let mut key = [0u8; 32];
        key[..8].copy_from_slice(&global_seed.to_le_bytes());
        key[8..16].copy_from_slice(&(client_id as u64).to_le_bytes());
        Self {
            client_id,
            data,
            rng: ChaCha8Rng::from_seed(key),
        }
    }

    /// Builds one client per dataset, ids in order.
    pub fn from_datasets(datasets: Vec<DiscreteDistribution>, global_seed: u64) -> Vec<Self> {
        datasets
            .into_iter()
            .enumerate()
            .map(|(i, d)| Self::new(i, d, global_seed))
            .collect()
    }

    fn round_rng(&self, round: usize) -> ChaCha8Rng {
        let mut rng = self.rng.clone();
        rng.set_stream(round as u64);
        rng.set_word_pos(0);
        rng
    }

    /// Minibatch of `size` samples drawn with replacement from the data
    /// weights for the given round.
    pub fn sample_batch(&self, round: usize, size: usize) -> Vec<&Sample> {
        let mut rng = self.round_rng(round);
        let cumulative: Vec<f64> = self
            .data
            .weights()
            .iter()
            .scan(0.0, |acc, w| {
                *acc += w;
                Some(*acc)
            })
            .collect();
        let total = *cumulative.last().unwrap();
        (0..size)
            .map(|_| {
                let u = rng.random::<f64>() * total;
                let k = cumulative.partition_point(|&c| c <= u).min(cumulative.len() - 1);
                &self.data.atoms()[k]
            })
            .collect()
    }
}

/// Message a client sends back to the server after a round.
#[derive(Debug, Clone, PartialEq)]
pub struct ClientUpdate {
    pub client_id: usize,
    /// `θ_{i,t+1} = θ_t − η_θ g^θ`
    pub theta_local: Vec<f64>,
    pub g_lambda: f64,
}

/// One local step: minibatch means of the estimators, then a gradient step
/// from the broadcast `θ_t`.
pub fn client_round<E: LocalEstimator + ?Sized>(
    cs: &ClientState,
    round: usize,
    theta: &[f64],
    hp: &HyperParams,
    estimator: &E,
) -> Result<ClientUpdate> {
    if cs.data.is_empty() {
        return Err(Error::invalid(format!("client {} has no data", cs.client_id)));
    }
    let batch = cs.sample_batch(round, hp.batch_size);
    let mut g_theta = vec![0.0; theta.len()];
    let mut g_lambda = 0.0;
    for zeta in &batch {
        let (g, gl) = estimator.estimate(theta, zeta, hp)?;
        for (acc, v) in g_theta.iter_mut().zip(&g) {
            *acc += v;
        }
        g_lambda += gl;
    }
    let b = batch.len() as f64;
    let theta_local = theta
        .iter()
        .zip(&g_theta)
        .map(|(t, g)| t - hp.eta_theta * g / b)
        .collect::<Vec<_>>();
    if theta_local.iter().any(|v| !v.is_finite()) {
        return Err(Error::invalid(format!(
            "client {} produced a non-finite local iterate",
            cs.client_id
        )));
    }
    Ok(ClientUpdate {
        client_id: cs.client_id,
        theta_local,
        g_lambda: g_lambda / b,
    })
}
