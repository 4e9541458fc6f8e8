//! Run configuration: a TOML file with `[run]`, `[hyper]`, `[score]`,
//! `[synthetic]` and `[adult]` sections, overridden by `section.key=value`
//! assignments.

use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::baselines::BaselineKind;
use crate::datasets::{AdultConfig, FederatedDataset, SyntheticConfig};
use crate::dro::HyperParams;
use crate::error::{Error, Result};
use crate::model::OutlierScore;

pub const ADULT_DIR_ENV: &str = "DORFL_ADULT_DIR";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DatasetKind {
    Synthetic,
    Adult,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Method {
    Dorfl,
    Erm,
    Afl,
    Wafl,
}

impl Method {
    pub const ALL: [Method; 4] = [Method::Dorfl, Method::Erm, Method::Afl, Method::Wafl];

    pub fn as_str(self) -> &'static str {
        match self {
            Method::Dorfl => "dorfl",
            Method::Erm => "erm",
            Method::Afl => "afl",
            Method::Wafl => "wafl",
        }
    }

    pub fn baseline(self) -> Option<BaselineKind> {
        match self {
            Method::Dorfl => None,
            Method::Erm => Some(BaselineKind::Erm),
            Method::Afl => Some(BaselineKind::Afl),
            Method::Wafl => Some(BaselineKind::Wafl),
        }
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Method::ALL
            .into_iter()
            .find(|m| m.as_str() == s)
            .ok_or_else(|| Error::config(format!("unknown method '{s}'")))
    }
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(default, deny_unknown_fields)]
struct RunSection {
    dataset: Option<DatasetKind>,
    methods: Option<Vec<Method>>,
    seed: Option<u64>,
    output_dir: Option<PathBuf>,
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(default, deny_unknown_fields)]
struct HyperSection {
    rho: Option<f64>,
    beta: Option<f64>,
    eta_theta: Option<f64>,
    eta_lambda: Option<f64>,
    inner_tol: Option<f64>,
    inner_max_iters: Option<usize>,
    rounds: Option<usize>,
    batch_size: Option<usize>,
    radius: Option<f64>,
    monitor_every: Option<usize>,
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(default, deny_unknown_fields)]
struct ScoreSection {
    variant: Option<String>,
    rho2: Option<f64>,
    prior_mean: Option<Vec<f64>>,
    threshold: Option<f64>,
    softness: Option<f64>,
    feature_index: Option<usize>,
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(default, deny_unknown_fields)]
struct RawConfig {
    run: RunSection,
    hyper: HyperSection,
    score: ScoreSection,
    synthetic: SyntheticConfig,
    adult: Option<AdultConfig>,
}

/// Score settings before the dataset is known; unset fields take
/// dataset-dependent defaults in [`RunConfig::resolve_score`].
#[derive(Debug, Clone, PartialEq, Default)]
pub struct ScoreConfig {
    pub variant: Option<String>,
    pub rho2: Option<f64>,
    pub prior_mean: Option<Vec<f64>>,
    pub threshold: Option<f64>,
    pub softness: Option<f64>,
    pub feature_index: Option<usize>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub dataset: DatasetKind,
    pub methods: Vec<Method>,
    pub seed: u64,
    pub output_dir: Option<PathBuf>,
    pub hyper: HyperParams,
    pub score: ScoreConfig,
    pub synthetic: SyntheticConfig,
    pub adult: AdultConfig,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self::from_table(toml::Table::new()).expect("defaults are valid")
    }
}

fn parse_value(text: &str) -> toml::Value {
    // Bare words such as `adult` are taken as strings.
    toml::from_str::<toml::Table>(&format!("v = {text}"))
        .ok()
        .and_then(|mut t| t.remove("v"))
        .unwrap_or_else(|| toml::Value::String(text.to_string()))
}

/// Applies `section.key=value`; nested keys create tables as needed.
fn apply_override(table: &mut toml::Table, assignment: &str) -> Result<()> {
    let (key, value) = assignment
        .split_once('=')
        .ok_or_else(|| Error::config(format!("override '{assignment}' is not key=value")))?;
    let path: Vec<&str> = key.trim().split('.').collect();
    if path.iter().any(|p| p.is_empty()) {
        return Err(Error::config(format!("bad override key '{key}'")));
    }
    let mut cur = table;
    for part in &path[..path.len() - 1] {
        let entry = cur
            .entry(part.to_string())
            .or_insert_with(|| toml::Value::Table(toml::Table::new()));
        cur = entry
            .as_table_mut()
            .ok_or_else(|| Error::config(format!("'{part}' is not a section")))?;
    }
    cur.insert(path[path.len() - 1].to_string(), parse_value(value.trim()));
    Ok(())
}

impl RunConfig {
    /// Parses a config file's text and applies overrides in order.
    pub fn parse(text: &str, overrides: &[String]) -> Result<Self> {
        let mut table: toml::Table =
            toml::from_str(text).map_err(|e| Error::config(format!("config: {e}")))?;
        for o in overrides {
            apply_override(&mut table, o)?;
        }
        Self::from_table(table)
    }

    pub fn load(path: Option<&Path>, overrides: &[String]) -> Result<Self> {
        let text = match path {
            Some(p) => std::fs::read_to_string(p).map_err(|e| Error::io(p, e))?,
            None => String::new(),
        };
        Self::parse(&text, overrides)
    }

    fn from_table(table: toml::Table) -> Result<Self> {
        let raw: RawConfig = toml::Value::Table(table)
            .try_into()
            .map_err(|e: toml::de::Error| Error::config(e.to_string()))?;
        let dataset = raw.run.dataset.unwrap_or(DatasetKind::Synthetic);
        let methods = raw.run.methods.unwrap_or_else(|| vec![Method::Dorfl]);
        if methods.is_empty() {
            return Err(Error::config("run.methods is empty"));
        }
        let h = raw.hyper;
        let mut hyper = HyperParams::with_rounds(h.rounds.unwrap_or(1000));
        hyper.rho = h.rho.unwrap_or(hyper.rho);
        hyper.beta = h.beta.unwrap_or(hyper.beta);
        hyper.eta_theta = h.eta_theta.unwrap_or(hyper.eta_theta);
        hyper.eta_lambda = h.eta_lambda.unwrap_or(hyper.eta_lambda);
        hyper.inner_tol = h.inner_tol.unwrap_or(hyper.inner_tol);
        hyper.inner_max_iters = h.inner_max_iters.unwrap_or(hyper.inner_max_iters);
        hyper.batch_size = h.batch_size.unwrap_or(hyper.batch_size);
        hyper.radius = h.radius.unwrap_or(hyper.radius);
        hyper.monitor_every = h.monitor_every.unwrap_or(100);
        hyper.validate()?;

        let seed = raw.run.seed.unwrap_or(0);
        let mut synthetic = raw.synthetic;
        synthetic.seed = seed;
        synthetic.validate()?;
        let adult = raw.adult.unwrap_or_else(|| match std::env::var_os(ADULT_DIR_ENV) {
            Some(dir) => AdultConfig::in_dir(Path::new(&dir)),
            None => AdultConfig::default(),
        });
        let s = raw.score;
        Ok(Self {
            dataset,
            methods,
            seed,
            output_dir: raw.run.output_dir,
            hyper,
            score: ScoreConfig {
                variant: s.variant,
                rho2: s.rho2,
                prior_mean: s.prior_mean,
                threshold: s.threshold,
                softness: s.softness,
                feature_index: s.feature_index,
            },
            synthetic,
            adult,
        })
    }

    /// Fills unset score fields from the dataset: quadratic with `ρ₂ = 0.5`
    /// around the pooled training median for synthetic data; sigmoid
    /// threshold on capital gain with `ρ₂ = 2`, `s = 0.1` for Adult.
    pub fn resolve_score(&self, data: &FederatedDataset) -> Result<OutlierScore> {
        let s = &self.score;
        let default_variant = match self.dataset {
            DatasetKind::Synthetic => "quadratic",
            DatasetKind::Adult => "sigmoid-threshold",
        };
        let score = match s.variant.as_deref().unwrap_or(default_variant) {
            "none" => OutlierScore::None,
            "quadratic" => OutlierScore::Quadratic {
                rho2: s.rho2.unwrap_or(match self.dataset {
                    DatasetKind::Synthetic => 0.5,
                    DatasetKind::Adult => 2.0,
                }),
                prior_mean: s
                    .prior_mean
                    .clone()
                    .unwrap_or_else(|| data.pooled_feature_median()),
            },
            "sigmoid-threshold" => OutlierScore::SigmoidThreshold {
                rho2: s.rho2.unwrap_or(2.0),
                threshold: match (s.threshold, data.threshold) {
                    (Some(t), _) | (None, Some(t)) => t,
                    (None, None) => {
                        return Err(Error::config(
                            "score.threshold is required for this dataset",
                        ))
                    }
                },
                softness: s.softness.unwrap_or(0.1),
                feature_index: s
                    .feature_index
                    .unwrap_or_else(AdultConfig::capital_gain_index),
            },
            other => return Err(Error::config(format!("unknown score variant '{other}'"))),
        };
        score.validate(data.dim())?;
        Ok(score)
    }

    /// Flat `key = value` listing of every resolved setting.
    pub fn echo(&self, score: &OutlierScore) -> Vec<(String, String)> {
        let mut out = vec![
            ("run.dataset".into(), format!("{:?}", self.dataset).to_lowercase()),
            (
                "run.methods".into(),
                self.methods.iter().map(|m| m.as_str()).collect::<Vec<_>>().join(";"),
            ),
            ("run.seed".into(), self.seed.to_string()),
        ];
        let h = &self.hyper;
        for (k, v) in [
            ("rho", h.rho.to_string()),
            ("beta", h.beta.to_string()),
            ("eta_theta", h.eta_theta.to_string()),
            ("eta_lambda", h.eta_lambda.to_string()),
            ("inner_tol", h.inner_tol.to_string()),
            ("inner_max_iters", h.inner_max_iters.to_string()),
            ("rounds", h.rounds.to_string()),
            ("batch_size", h.batch_size.to_string()),
            ("radius", h.radius.to_string()),
            ("monitor_every", h.monitor_every.to_string()),
        ] {
            out.push((format!("hyper.{k}"), v));
        }
        let join = |v: &[f64]| v.iter().map(f64::to_string).collect::<Vec<_>>().join(";");
        match score {
            OutlierScore::None => out.push(("score.variant".into(), "none".into())),
            OutlierScore::Quadratic { rho2, prior_mean } => {
                out.push(("score.variant".into(), "quadratic".into()));
                out.push(("score.rho2".into(), rho2.to_string()));
                out.push(("score.prior_mean".into(), join(prior_mean)));
            }
            OutlierScore::SigmoidThreshold {
                rho2,
                threshold,
                softness,
                feature_index,
            } => {
                out.push(("score.variant".into(), "sigmoid-threshold".into()));
                out.push(("score.rho2".into(), rho2.to_string()));
                out.push(("score.threshold".into(), threshold.to_string()));
                out.push(("score.softness".into(), softness.to_string()));
                out.push(("score.feature_index".into(), feature_index.to_string()));
            }
        }
        match self.dataset {
            DatasetKind::Synthetic => {
                let c = &self.synthetic;
                let sizes = c.sizes.iter().map(usize::to_string).collect::<Vec<_>>().join(";");
                out.push(("synthetic.sizes".into(), sizes));
                out.push(("synthetic.contamination_rates".into(), join(&c.contamination_rates)));
                out.push(("synthetic.contamination_factors".into(), join(&c.contamination_factors)));
                out.push(("synthetic.shift_magnitudes".into(), join(&c.shift_magnitudes)));
                out.push(("synthetic.shift_feature".into(), c.shift_feature.to_string()));
                out.push(("synthetic.theta_star".into(), join(&c.theta_star)));
                out.push(("synthetic.test_size_per_client".into(), c.test_size_per_client.to_string()));
                for (i, m) in c.means.iter().enumerate() {
                    out.push((format!("synthetic.mean{}", i + 1), join(m)));
                }
            }
            DatasetKind::Adult => {
                let a = &self.adult;
                out.push(("adult.train_path".into(), a.train_path.display().to_string()));
                out.push(("adult.test_path".into(), a.test_path.display().to_string()));
                out.push((
                    "adult.capital_gain_threshold_dollars".into(),
                    a.capital_gain_threshold_dollars.to_string(),
                ));
            }
        }
        out
    }
}
