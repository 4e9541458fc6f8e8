use std::collections::BTreeSet;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::distribution::DiscreteDistribution;
use crate::error::{Error, Result};
use crate::model::{Label, Sample};

use super::{FeatureStats, FederatedDataset};

pub const ADULT_COLUMNS: [&str; 15] = [
    "age",
    "workclass",
    "fnlwgt",
    "education",
    "education-num",
    "marital-status",
    "occupation",
    "relationship",
    "race",
    "sex",
    "capital-gain",
    "capital-loss",
    "hours-per-week",
    "native-country",
    "income",
];

/// Numeric columns, in the order they lead the feature vector.
pub const ADULT_NUMERIC: [&str; 6] = [
    "age",
    "fnlwgt",
    "education-num",
    "capital-gain",
    "capital-loss",
    "hours-per-week",
];

const GROUPS: [&str; 3] = ["White", "Black", "Other"];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AdultConfig {
    pub train_path: PathBuf,
    pub test_path: PathBuf,
    pub capital_gain_threshold_dollars: f64,
}

impl Default for AdultConfig {
    fn default() -> Self {
        Self {
            train_path: PathBuf::from("adult.data"),
            test_path: PathBuf::from("adult.test"),
            capital_gain_threshold_dollars: 20_000.0,
        }
    }
}

impl AdultConfig {
    /// Canonical file names inside a directory.
    pub fn in_dir(dir: &Path) -> Self {
        Self {
            train_path: dir.join("adult.data"),
            test_path: dir.join("adult.test"),
            ..Self::default()
        }
    }

    /// Index of standardized capital gain in the feature vector.
    pub fn capital_gain_index() -> usize {
        3
    }
}

struct Row {
    fields: Vec<String>,
    label: Label,
}

fn column(name: &str) -> usize {
    ADULT_COLUMNS.iter().position(|c| *c == name).unwrap()
}

fn parse_rows(text: &str, path: &Path) -> Result<Vec<Row>> {
    let mut rows = Vec::new();
    for (idx, raw) in text.lines().enumerate() {
        let line = idx + 1;
        let trimmed = raw.trim();
        // The test split opens with a "|1x3 Cross validator" banner.
        if trimmed.is_empty() || trimmed.starts_with('|') {
            continue;
        }
        let fields: Vec<String> = trimmed.split(',').map(|f| f.trim().to_string()).collect();
        if fields.len() != ADULT_COLUMNS.len() {
            return Err(Error::Format(format!(
                "{}:{line}: expected {} columns, found {}",
                path.display(),
                ADULT_COLUMNS.len(),
                fields.len()
            )));
        }
        if fields.iter().any(|f| f == "?") {
            continue;
        }
        for name in ADULT_NUMERIC {
            let v = &fields[column(name)];
            if !v.parse::<f64>().is_ok_and(f64::is_finite) {
                return Err(Error::Parse {
                    line,
                    message: format!("{}: {name} is not a number: '{v}'", path.display()),
                });
            }
        }
        let label = match fields[column("income")].trim_end_matches('.') {
            ">50K" => Label::Positive,
            "<=50K" => Label::Negative,
            other => {
                return Err(Error::Parse {
                    line,
                    message: format!("{}: unknown income label '{other}'", path.display()),
                })
            }
        };
        rows.push(Row { fields, label });
    }
    Ok(rows)
}

fn group_of(race: &str) -> usize {
    match race {
        "White" => 0,
        "Black" => 1,
        _ => 2,
    }
}

fn read(path: &Path, hasher: &mut Sha256) -> Result<String> {
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    hasher.update(&bytes);
    String::from_utf8(bytes).map_err(|_| Error::Format(format!("{}: not UTF-8 text", path.display())))
}

/// Loads both splits, one-hot encodes categoricals with the training
/// vocabulary, standardizes numeric columns with training statistics and
/// partitions by race into White, Black and Other.
pub fn load_adult(cfg: &AdultConfig) -> Result<FederatedDataset> {
    if !(cfg.capital_gain_threshold_dollars > 0.0) {
        return Err(Error::config("capital-gain threshold must be positive"));
    }
    let mut hasher = Sha256::new();
    let train = parse_rows(&read(&cfg.train_path, &mut hasher)?, &cfg.train_path)?;
    let test = parse_rows(&read(&cfg.test_path, &mut hasher)?, &cfg.test_path)?;
    if train.is_empty() || test.is_empty() {
        return Err(Error::invalid("Adult split has no usable rows"));
    }
    let checksum = hex::encode(hasher.finalize());

    let numeric_cols: Vec<usize> = ADULT_NUMERIC.iter().map(|n| column(n)).collect();
    let categorical_cols: Vec<usize> = (0..ADULT_COLUMNS.len() - 1)
        .filter(|c| !numeric_cols.contains(c))
        .collect();

    let n = train.len() as f64;
    let stats: Vec<FeatureStats> = numeric_cols
        .iter()
        .map(|&c| {
            let vals: Vec<f64> = train.iter().map(|r| r.fields[c].parse().unwrap()).collect();
            let mean = vals.iter().sum::<f64>() / n;
            let var = vals.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n;
            FeatureStats {
                mean,
                std: if var > 0.0 { var.sqrt() } else { 1.0 },
            }
        })
        .collect();
    let vocab: Vec<Vec<String>> = categorical_cols
        .iter()
        .map(|&c| {
            train
                .iter()
                .map(|r| r.fields[c].clone())
                .collect::<BTreeSet<_>>()
                .into_iter()
                .collect()
        })
        .collect();

    let mut feature_names: Vec<String> = ADULT_NUMERIC.iter().map(|s| s.to_string()).collect();
    for (&c, values) in categorical_cols.iter().zip(&vocab) {
        for v in values {
            feature_names.push(format!("{}={v}", ADULT_COLUMNS[c]));
        }
    }
    let mut feature_stats = stats.clone();
    feature_stats.resize(
        feature_names.len(),
        FeatureStats {
            mean: 0.0,
            std: 1.0,
        },
    );

    let encode = |r: &Row| -> Sample {
        let mut x: Vec<f64> = numeric_cols
            .iter()
            .zip(&stats)
            .map(|(&c, s)| (r.fields[c].parse::<f64>().unwrap() - s.mean) / s.std)
            .collect();
        for (&c, values) in categorical_cols.iter().zip(&vocab) {
            let v = &r.fields[c];
            x.extend(values.iter().map(|u| if u == v { 1.0 } else { 0.0 }));
        }
        Sample {
            features: x,
            label: r.label,
        }
    };

    let race = column("race");
    let mut parts: Vec<Vec<Sample>> = vec![Vec::new(); GROUPS.len()];
    for r in &train {
        parts[group_of(&r.fields[race])].push(encode(r));
    }
    if let Some(g) = parts.iter().position(Vec::is_empty) {
        return Err(Error::invalid(format!("no training rows for group {}", GROUPS[g])));
    }
    let contaminated = parts.iter().map(|p| vec![false; p.len()]).collect();
    let clients = parts
        .into_iter()
        .map(DiscreteDistribution::uniform)
        .collect::<Result<Vec<_>>>()?;
    let test_groups = test.iter().map(|r| group_of(&r.fields[race])).collect();
    let clean_test = DiscreteDistribution::uniform(test.iter().map(encode).collect())?;

    let gain = stats[AdultConfig::capital_gain_index()];
    Ok(FederatedDataset {
        clients,
        contaminated,
        clean_test,
        test_groups,
        group_names: GROUPS.iter().map(|s| s.to_string()).collect(),
        feature_names,
        feature_stats,
        threshold: Some((cfg.capital_gain_threshold_dollars - gain.mean) / gain.std),
        checksum: Some(checksum),
    })
}
