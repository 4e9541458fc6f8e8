//! Federated datasets: the contaminated Gaussian benchmark and the UCI Adult
//! income data partitioned by race.

mod adult;
mod synthetic;

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::distribution::DiscreteDistribution;
use crate::error::{Error, Result};

pub use adult::{load_adult, AdultConfig, ADULT_COLUMNS, ADULT_NUMERIC};
pub use synthetic::{generate_synthetic, SyntheticConfig};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FeatureStats {
    pub mean: f64,
    pub std: f64,
}

#[derive(Debug, Clone)]
pub struct FederatedDataset {
    /// Training data per client, uniform weights.
    pub clients: Vec<DiscreteDistribution>,
    /// Per client and sample: whether the sample was contaminated.
    pub contaminated: Vec<Vec<bool>>,
    pub clean_test: DiscreteDistribution,
    /// Client index of each clean test atom.
    pub test_groups: Vec<usize>,
    pub group_names: Vec<String>,
    pub feature_names: Vec<String>,
    pub feature_stats: Vec<FeatureStats>,
    /// Standardized threshold of the scored feature, when one exists.
    pub threshold: Option<f64>,
    pub checksum: Option<String>,
}

impl FederatedDataset {
    pub fn dim(&self) -> usize {
        self.clean_test.dim()
    }

    pub fn client_sizes(&self) -> Vec<usize> {
        self.clients.iter().map(DiscreteDistribution::len).collect()
    }

    /// Coordinate-wise median of the pooled training features.
    pub fn pooled_feature_median(&self) -> Vec<f64> {
        let d = self.dim();
        (0..d)
            .map(|k| {
                let mut v: Vec<f64> = self
                    .clients
                    .iter()
                    .flat_map(|c| c.atoms().iter().map(move |s| s.features[k]))
                    .collect();
                v.sort_by(f64::total_cmp);
                let n = v.len();
                if n % 2 == 1 {
                    v[n / 2]
                } else {
                    0.5 * (v[n / 2 - 1] + v[n / 2])
                }
            })
            .collect()
    }

    /// Test atoms belonging to one group.
    pub fn test_slice(&self, group: usize) -> Result<DiscreteDistribution> {
        let atoms: Vec<_> = self
            .clean_test
            .atoms()
            .iter()
            .zip(&self.test_groups)
            .filter(|(_, &g)| g == group)
            .map(|(s, _)| s.clone())
            .collect();
        if atoms.is_empty() {
            return Err(Error::invalid(format!("group {group} has no test samples")));
        }
        DiscreteDistribution::uniform(atoms)
    }

    /// One row per training sample: `client_id, contaminated, x_1..x_d, label`.
    pub fn training_csv(&self) -> String {
        let mut out = String::from("client_id,contaminated");
        for name in &self.feature_names {
            let _ = write!(out, ",{name}");
        }
        out.push_str(",label\n");
        for (i, (data, flags)) in self.clients.iter().zip(&self.contaminated).enumerate() {
            for (s, &c) in data.atoms().iter().zip(flags) {
                let _ = write!(out, "{i},{}", c as u8);
                for x in &s.features {
                    let _ = write!(out, ",{x}");
                }
                let _ = writeln!(out, ",{}", s.label.as_i8());
            }
        }
        out
    }
}
