use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::distribution::DiscreteDistribution;
use crate::error::{Error, Result};
use crate::model::{dot, sigmoid, Label, Sample};

use super::{FeatureStats, FederatedDataset};

/// Gaussian clients with multiplicative contamination and a mean shift on
/// one feature of the clean training samples.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SyntheticConfig {
    pub means: Vec<Vec<f64>>,
    pub sizes: Vec<usize>,
    pub contamination_rates: Vec<f64>,
    pub contamination_factors: Vec<f64>,
    pub shift_magnitudes: Vec<f64>,
    pub shift_feature: usize,
    pub theta_star: Vec<f64>,
    pub test_size_per_client: usize,
    pub seed: u64,
}

impl Default for SyntheticConfig {
    fn default() -> Self {
        Self {
            means: vec![
                vec![0.0; 5],
                vec![1.0, 1.0, 0.0, 0.0, 0.0],
                vec![2.0, 2.0, 0.5, 1.0, 2.0],
            ],
            sizes: vec![100, 200, 500],
            contamination_rates: vec![0.1, 0.05, 0.1],
            contamination_factors: vec![7.0, 8.0, 9.0],
            shift_magnitudes: vec![1.0, -0.5, 0.6],
            shift_feature: 0,
            theta_star: [1.0, -1.0, 0.5, 0.5, -0.5].iter().map(|v| v * 7.0).collect(),
            test_size_per_client: 1000,
            seed: 0,
        }
    }
}

impl SyntheticConfig {
    pub fn num_clients(&self) -> usize {
        self.means.len()
    }

    pub fn dim(&self) -> usize {
        self.theta_star.len()
    }

    pub fn validate(&self) -> Result<()> {
        let n = self.num_clients();
        if n == 0 {
            return Err(Error::config("synthetic data needs at least one client"));
        }
        let lens = [
            ("sizes", self.sizes.len()),
            ("contamination_rates", self.contamination_rates.len()),
            ("contamination_factors", self.contamination_factors.len()),
            ("shift_magnitudes", self.shift_magnitudes.len()),
        ];
        for (name, len) in lens {
            if len != n {
                return Err(Error::config(format!("{name} has {len} entries for {n} clients")));
            }
        }
        let d = self.dim();
        if d == 0 || self.means.iter().any(|m| m.len() != d) {
            return Err(Error::config("means and theta_star must share a positive dimension"));
        }
        if self.shift_feature >= d {
            return Err(Error::config("shift_feature is out of range"));
        }
        if self.sizes.contains(&0) || self.test_size_per_client == 0 {
            return Err(Error::config("sample sizes must be positive"));
        }
        if self.contamination_rates.iter().any(|r| !(0.0..=1.0).contains(r)) {
            return Err(Error::config("contamination rates must lie in [0, 1]"));
        }
        let finite = self
            .means
            .iter()
            .flatten()
            .chain(&self.contamination_factors)
            .chain(&self.shift_magnitudes)
            .chain(&self.theta_star)
            .all(|v| v.is_finite());
        if !finite {
            return Err(Error::config("synthetic parameters must be finite"));
        }
        Ok(())
    }

    /// Per-coordinate mean and standard deviation of the nominal law: the
    /// equal-weight mixture of the client Gaussians.
    pub fn nominal_stats(&self) -> Vec<FeatureStats> {
        let n = self.num_clients() as f64;
        (0..self.dim())
            .map(|k| {
                let mean = self.means.iter().map(|m| m[k]).sum::<f64>() / n;
                let second = self.means.iter().map(|m| m[k] * m[k]).sum::<f64>() / n;
                FeatureStats {
                    mean,
                    std: (1.0 + second - mean * mean).sqrt(),
                }
            })
            .collect()
    }
}

fn draw(rng: &mut ChaCha8Rng, mean: &[f64], theta_star: &[f64]) -> Sample {
    let x: Vec<f64> = mean
        .iter()
        .map(|m| m + rng.sample::<f64, _>(StandardNormal))
        .collect();
    let p = sigmoid(dot(theta_star, &x));
    let label = if rng.random::<f64>() < p { Label::Positive } else { Label::Negative };
    Sample { features: x, label }
}

pub fn generate_synthetic(cfg: &SyntheticConfig) -> Result<FederatedDataset> {
    cfg.validate()?;
    let mut train_rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut test_rng = train_rng.clone();
    test_rng.set_stream(1);

    let mut clients = Vec::with_capacity(cfg.num_clients());
    let mut contaminated = Vec::with_capacity(cfg.num_clients());
    let mut test_atoms = Vec::new();
    let mut test_groups = Vec::new();
    for i in 0..cfg.num_clients() {
        let mut samples: Vec<Sample> = (0..cfg.sizes[i])
            .map(|_| draw(&mut train_rng, &cfg.means[i], &cfg.theta_star))
            .collect();
        let mut order: Vec<usize> = (0..samples.len()).collect();
        order.shuffle(&mut train_rng);
        let n_bad = (cfg.contamination_rates[i] * samples.len() as f64).floor() as usize;
        let mut flags = vec![false; samples.len()];
        for &k in &order[..n_bad] {
            flags[k] = true;
        }
        for (s, &bad) in samples.iter_mut().zip(&flags) {
            if bad {
                s.features.iter_mut().for_each(|v| *v *= cfg.contamination_factors[i]);
            } else {
                s.features[cfg.shift_feature] += cfg.shift_magnitudes[i];
            }
        }
        clients.push(DiscreteDistribution::uniform(samples)?);
        contaminated.push(flags);

        for _ in 0..cfg.test_size_per_client {
            test_atoms.push(draw(&mut test_rng, &cfg.means[i], &cfg.theta_star));
            test_groups.push(i);
        }
    }
    Ok(FederatedDataset {
        clients,
        contaminated,
        clean_test: DiscreteDistribution::uniform(test_atoms)?,
        test_groups,
        group_names: (1..=cfg.num_clients()).map(|i| format!("client{i}")).collect(),
        feature_names: (1..=cfg.dim()).map(|k| format!("x{k}")).collect(),
        feature_stats: cfg.nominal_stats(),
        threshold: None,
        checksum: None,
    })
}
