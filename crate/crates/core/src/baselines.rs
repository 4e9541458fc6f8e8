//! Reference trainers run through the same federation loop with their own
//! local estimators: FedAvg-style ERM, agnostic FL and a Wasserstein
//! (Lagrangian penalty) variant at fixed mixture.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::distribution::DiscreteDistribution;
use crate::dro::{inner_maximize, HyperParams};
use crate::error::{Error, Result};
use crate::federation::{run_training_with, ClientState, LocalEstimator, MixtureWeights, TrainingTrace};
use crate::model::{logistic_loss, logistic_loss_grad_theta, OutlierScore, Sample};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BaselineKind {
    Erm,
    Afl,
    Wafl,
}

impl BaselineKind {
    pub const ALL: [BaselineKind; 3] = [BaselineKind::Erm, BaselineKind::Afl, BaselineKind::Wafl];

    pub fn as_str(self) -> &'static str {
        match self {
            BaselineKind::Erm => "erm",
            BaselineKind::Afl => "afl",
            BaselineKind::Wafl => "wafl",
        }
    }
}

impl fmt::Display for BaselineKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for BaselineKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "erm" => Ok(BaselineKind::Erm),
            "afl" => Ok(BaselineKind::Afl),
            "wafl" => Ok(BaselineKind::Wafl),
            other => Err(Error::config(format!("unknown baseline '{other}'"))),
        }
    }
}

/// Plain logistic-loss gradient at the sample; `g^λ` is the loss itself.
#[derive(Debug, Clone, Copy)]
pub struct ErmEstimator;

impl LocalEstimator for ErmEstimator {
    fn name(&self) -> &str {
        "erm"
    }

    fn estimate(&self, theta: &[f64], zeta: &Sample, _hp: &HyperParams) -> Result<(Vec<f64>, f64)> {
        Ok((logistic_loss_grad_theta(theta, zeta)?, logistic_loss(theta, zeta)?))
    }

    fn updates_lambda(&self) -> bool {
        false
    }
}

/// ERM estimators with projected ascent of `λ` on the per-client loss.
#[derive(Debug, Clone, Copy)]
pub struct AflEstimator;

impl LocalEstimator for AflEstimator {
    fn name(&self) -> &str {
        "afl"
    }

    fn estimate(&self, theta: &[f64], zeta: &Sample, hp: &HyperParams) -> Result<(Vec<f64>, f64)> {
        ErmEstimator.estimate(theta, zeta, hp)
    }

    fn updates_lambda(&self) -> bool {
        true
    }
}

/// Untilted loss gradient at the penalized worst-case perturbation.
#[derive(Debug, Clone, Copy)]
pub struct WaflEstimator;

impl LocalEstimator for WaflEstimator {
    fn name(&self) -> &str {
        "wafl"
    }

    fn estimate(&self, theta: &[f64], zeta: &Sample, hp: &HyperParams) -> Result<(Vec<f64>, f64)> {
        let r = inner_maximize(theta, zeta, hp, &OutlierScore::None)?;
        Ok((logistic_loss_grad_theta(theta, &r.maximizer)?, r.value))
    }

    fn updates_lambda(&self) -> bool {
        false
    }
}

pub fn estimator_for(kind: BaselineKind) -> Box<dyn LocalEstimator> {
    match kind {
        BaselineKind::Erm => Box::new(ErmEstimator),
        BaselineKind::Afl => Box::new(AflEstimator),
        BaselineKind::Wafl => Box::new(WaflEstimator),
    }
}

/// Trains a baseline. ERM and WAFL fix `λ` to the sample-size proportions;
/// AFL starts from uniform weights.
pub fn run_baseline(
    kind: BaselineKind,
    datasets: &[DiscreteDistribution],
    hp: &HyperParams,
    seed: u64,
) -> Result<TrainingTrace> {
    let clients = ClientState::from_datasets(datasets.to_vec(), seed);
    let lambda0 = match kind {
        BaselineKind::Afl => MixtureWeights::uniform(clients.len())?,
        BaselineKind::Erm | BaselineKind::Wafl => {
            let counts: Vec<usize> = datasets.iter().map(DiscreteDistribution::len).collect();
            MixtureWeights::proportional(&counts)?
        }
    };
    run_training_with(&clients, hp, estimator_for(kind).as_ref(), lambda0)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::federation::run_training;
    use crate::model::{norm, Label};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn data(seed: u64, sizes: &[usize]) -> Vec<DiscreteDistribution> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        sizes
            .iter()
            .map(|&n| {
                let atoms = (0..n)
                    .map(|_| {
                        let x: Vec<f64> = (0..3).map(|_| rng.random_range(-2.0..2.0)).collect();
                        let y = if x[0] - x[2] > 0.0 { Label::Positive } else { Label::Negative };
                        Sample::new(x, y).unwrap()
                    })
                    .collect();
                DiscreteDistribution::uniform(atoms).unwrap()
            })
            .collect()
    }

    #[test]
    fn names_round_trip() {
        for k in BaselineKind::ALL {
            assert_eq!(k.as_str().parse::<BaselineKind>().unwrap(), k);
        }
        assert!("gdrfl".parse::<BaselineKind>().is_err());
    }

    #[test]
    fn erm_single_client_is_plain_sgd() {
        let d = data(1, &[40]);
        let hp = HyperParams::with_rounds(30);
        let trace = run_baseline(BaselineKind::Erm, &d, &hp, 4).unwrap();
        let client = ClientState::new(0, d[0].clone(), 4);
        let mut theta = vec![0.0; 3];
        for (t, r) in trace.rounds.iter().enumerate() {
            let z = client.sample_batch(t, 1)[0];
            let g = logistic_loss_grad_theta(&theta, z).unwrap();
            theta = theta.iter().zip(&g).map(|(a, b)| a - hp.eta_theta * b).collect();
            assert_eq!(r.theta, theta);
        }
    }

    #[test]
    fn afl_keeps_symmetric_clients_uniform() {
        let one = data(2, &[25]).remove(0);
        // Identical data and identical random streams: every coordinate of
        // the ascent direction agrees, and projection preserves the tie.
        let base = ClientState::new(0, one, 5);
        let clients: Vec<ClientState> = (0..3)
            .map(|i| {
                let mut c = base.clone();
                c.client_id = i;
                c
            })
            .collect();
        let hp = HyperParams::with_rounds(40);
        let trace =
            run_training_with(&clients, &hp, &AflEstimator, MixtureWeights::uniform(3).unwrap()).unwrap();
        for r in &trace.rounds {
            for l in &r.lambda {
                assert!((l - 1.0 / 3.0).abs() < 1e-12, "{:?}", r.lambda);
            }
        }
    }

    #[test]
    fn wafl_with_huge_rho_tracks_erm() {
        let d = data(3, &[20, 30]);
        let hp = HyperParams {
            rho: 1e9,
            ..HyperParams::with_rounds(100)
        };
        let erm = run_baseline(BaselineKind::Erm, &d, &hp, 8).unwrap();
        let wafl = run_baseline(BaselineKind::Wafl, &d, &hp, 8).unwrap();
        for (a, b) in erm.rounds.iter().zip(&wafl.rounds) {
            let diff: Vec<f64> = a.theta.iter().zip(&b.theta).map(|(x, y)| x - y).collect();
            assert!(norm(&diff) <= 1e-6);
        }
    }

    #[test]
    fn tilt_ratio_flattens_as_beta_grows() {
        let d = data(4, &[15, 15]);
        let mut prev = f64::INFINITY;
        for beta in [1.0, 1e2, 1e4] {
            let hp = HyperParams {
                beta,
                ..HyperParams::with_rounds(20)
            };
            let trace = run_training(&d, &hp, &OutlierScore::None, 6).unwrap();
            let worst = trace
                .rounds
                .iter()
                .map(|r| (r.g_lambda[0] / r.g_lambda[1]).ln().abs())
                .fold(0.0, f64::max);
            assert!(worst <= prev);
            prev = worst;
            if beta >= 1e4 {
                assert!(worst < 1e-3, "{worst}");
            }
        }
        // The tilt does not vanish into WAFL: the estimators keep their scale.
        let hp = HyperParams {
            beta: 1e4,
            ..HyperParams::with_rounds(20)
        };
        let dorfl = run_training(&d, &hp, &OutlierScore::None, 6).unwrap();
        let wafl = run_baseline(BaselineKind::Wafl, &d, &hp, 6).unwrap();
        assert_ne!(dorfl.theta_bar, wafl.theta_bar);
    }
}
