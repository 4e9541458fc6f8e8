use std::fmt::Write as _;

use crate::error::{Error, Result};

use super::config::{DatasetKind, Method};

/// Metrics of one trained method, plus the resolved configuration and a
/// short summary of its training trace.
#[derive(Debug, Clone, PartialEq)]
pub struct MetricsReport {
    pub method: Method,
    pub dataset: DatasetKind,
    pub seed: u64,
    pub overall_accuracy: f64,
    pub group_names: Vec<String>,
    pub group_accuracy: Vec<f64>,
    pub worst_group_accuracy: f64,
    pub excess_risk: f64,
    pub test_loss: f64,
    pub checksum: String,
    pub rounds: usize,
    pub final_gap_surrogate: Option<f64>,
    pub final_lambda: Vec<f64>,
    pub theta_bar: Vec<f64>,
    /// Flattened resolved configuration, in echo order.
    pub config: Vec<(String, String)>,
}

fn join(v: &[f64]) -> String {
    v.iter().map(f64::to_string).collect::<Vec<_>>().join(";")
}

fn split(s: &str) -> Result<Vec<f64>> {
    if s.is_empty() {
        return Ok(Vec::new());
    }
    s.split(';').map(parse_f64).collect()
}

fn parse_f64(s: &str) -> Result<f64> {
    s.parse()
        .map_err(|_| Error::Format(format!("'{s}' is not a number")))
}

impl MetricsReport {
    /// Flat `key,value` rows. Floats use shortest round-trip formatting.
    pub fn to_rows(&self) -> Vec<(String, String)> {
        let mut rows = vec![
            ("method".to_string(), self.method.to_string()),
            ("dataset".into(), format!("{:?}", self.dataset).to_lowercase()),
            ("seed".into(), self.seed.to_string()),
            ("overall_accuracy".into(), self.overall_accuracy.to_string()),
        ];
        for (k, (name, acc)) in self.group_names.iter().zip(&self.group_accuracy).enumerate() {
            rows.push((format!("group.{}.name", k + 1), name.clone()));
            rows.push((format!("group.{}.accuracy", k + 1), acc.to_string()));
        }
        rows.extend([
            ("worst_group_accuracy".into(), self.worst_group_accuracy.to_string()),
            ("excess_risk".into(), self.excess_risk.to_string()),
            ("test_loss".into(), self.test_loss.to_string()),
            ("checksum".into(), self.checksum.clone()),
            ("trace.rounds".into(), self.rounds.to_string()),
            (
                "trace.final_gap_surrogate".into(),
                self.final_gap_surrogate.map_or(String::new(), |g| g.to_string()),
            ),
            ("trace.final_lambda".into(), join(&self.final_lambda)),
            ("trace.theta_bar".into(), join(&self.theta_bar)),
        ]);
        for (k, v) in &self.config {
            rows.push((format!("config.{k}"), v.clone()));
        }
        rows
    }

    pub fn to_csv(&self) -> Result<String> {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(["key", "value"]).map_err(csv_err)?;
        for (k, v) in self.to_rows() {
            w.write_record([k, v]).map_err(csv_err)?;
        }
        let bytes = w.into_inner().map_err(|e| Error::Format(e.to_string()))?;
        String::from_utf8(bytes).map_err(|e| Error::Format(e.to_string()))
    }

    pub fn from_csv(text: &str) -> Result<Self> {
        let mut r = csv::ReaderBuilder::new()
            .has_headers(true)
            .from_reader(text.as_bytes());
        let mut rows = Vec::new();
        for rec in r.records() {
            let rec = rec.map_err(csv_err)?;
            if rec.len() != 2 {
                return Err(Error::Format(format!("report row has {} fields", rec.len())));
            }
            rows.push((rec[0].to_string(), rec[1].to_string()));
        }
        Self::from_rows(rows)
    }

    fn from_rows(rows: Vec<(String, String)>) -> Result<Self> {
        let mut method = None;
        let mut dataset = None;
        let mut seed = None;
        let mut overall = None;
        let mut groups: Vec<(Option<String>, Option<f64>)> = Vec::new();
        let mut worst = None;
        let mut excess = None;
        let mut loss = None;
        let mut checksum = None;
        let mut rounds = None;
        let mut gap = None;
        let mut lambda = None;
        let mut theta_bar = None;
        let mut config = Vec::new();
        for (k, v) in rows {
            match k.as_str() {
                "method" => method = Some(v.parse::<Method>().map_err(|e| Error::Format(e.to_string()))?),
                "dataset" => {
                    dataset = Some(match v.as_str() {
                        "synthetic" => DatasetKind::Synthetic,
                        "adult" => DatasetKind::Adult,
                        other => return Err(Error::Format(format!("unknown dataset '{other}'"))),
                    })
                }
                "seed" => seed = Some(v.parse().map_err(|_| Error::Format(format!("bad seed '{v}'")))?),
                "overall_accuracy" => overall = Some(parse_f64(&v)?),
                "worst_group_accuracy" => worst = Some(parse_f64(&v)?),
                "excess_risk" => excess = Some(parse_f64(&v)?),
                "test_loss" => loss = Some(parse_f64(&v)?),
                "checksum" => checksum = Some(v),
                "trace.rounds" => {
                    rounds = Some(v.parse().map_err(|_| Error::Format(format!("bad rounds '{v}'")))?)
                }
                "trace.final_gap_surrogate" => {
                    gap = Some(if v.is_empty() { None } else { Some(parse_f64(&v)?) })
                }
                "trace.final_lambda" => lambda = Some(split(&v)?),
                "trace.theta_bar" => theta_bar = Some(split(&v)?),
                _ => {
                    if let Some(rest) = k.strip_prefix("config.") {
                        config.push((rest.to_string(), v));
                    } else if let Some(rest) = k.strip_prefix("group.") {
                        let (idx, field) = rest
                            .split_once('.')
                            .ok_or_else(|| Error::Format(format!("bad key '{k}'")))?;
                        let idx: usize = idx
                            .parse()
                            .ok()
                            .filter(|&i| i >= 1)
                            .ok_or_else(|| Error::Format(format!("bad key '{k}'")))?;
                        if groups.len() < idx {
                            groups.resize(idx, (None, None));
                        }
                        match field {
                            "name" => groups[idx - 1].0 = Some(v),
                            "accuracy" => groups[idx - 1].1 = Some(parse_f64(&v)?),
                            _ => return Err(Error::Format(format!("unknown key '{k}'"))),
                        }
                    } else {
                        return Err(Error::Format(format!("unknown key '{k}'")));
                    }
                }
            }
        }
        let missing = |name: &str| Error::Format(format!("report is missing '{name}'"));
        let mut group_names = Vec::with_capacity(groups.len());
        let mut group_accuracy = Vec::with_capacity(groups.len());
        for (k, (n, a)) in groups.into_iter().enumerate() {
            group_names.push(n.ok_or_else(|| missing(&format!("group.{}.name", k + 1)))?);
            group_accuracy.push(a.ok_or_else(|| missing(&format!("group.{}.accuracy", k + 1)))?);
        }
        Ok(Self {
            method: method.ok_or_else(|| missing("method"))?,
            dataset: dataset.ok_or_else(|| missing("dataset"))?,
            seed: seed.ok_or_else(|| missing("seed"))?,
            overall_accuracy: overall.ok_or_else(|| missing("overall_accuracy"))?,
            group_names,
            group_accuracy,
            worst_group_accuracy: worst.ok_or_else(|| missing("worst_group_accuracy"))?,
            excess_risk: excess.ok_or_else(|| missing("excess_risk"))?,
            test_loss: loss.ok_or_else(|| missing("test_loss"))?,
            checksum: checksum.ok_or_else(|| missing("checksum"))?,
            rounds: rounds.ok_or_else(|| missing("trace.rounds"))?,
            final_gap_surrogate: gap.ok_or_else(|| missing("trace.final_gap_surrogate"))?,
            final_lambda: lambda.ok_or_else(|| missing("trace.final_lambda"))?,
            theta_bar: theta_bar.ok_or_else(|| missing("trace.theta_bar"))?,
            config,
        })
    }
}

fn csv_err(e: csv::Error) -> Error {
    Error::Format(e.to_string())
}

/// Markdown comparison table: `Overall/Group1..N` for synthetic runs,
/// `Accuracy/ExcessRisk` for Adult. Accuracies are in percent.
pub fn comparison_table(reports: &[MetricsReport]) -> String {
    let mut out = String::new();
    let Some(first) = reports.first() else {
        return out;
    };
    match first.dataset {
        DatasetKind::Synthetic => {
            out.push_str("| Method | Overall |");
            for k in 1..=first.group_accuracy.len() {
                let _ = write!(out, " Group{k} |");
            }
            out.push_str("\n|---|---|");
            out.push_str(&"---|".repeat(first.group_accuracy.len()));
            out.push('\n');
            for r in reports {
                let _ = write!(out, "| {} | {:.1} |", r.method, 100.0 * r.overall_accuracy);
                for a in &r.group_accuracy {
                    let _ = write!(out, " {:.1} |", 100.0 * a);
                }
                out.push('\n');
            }
        }
        DatasetKind::Adult => {
            out.push_str("| Method | Accuracy | ExcessRisk |\n|---|---|---|\n");
            for r in reports {
                let _ = writeln!(
                    out,
                    "| {} | {:.1} | {:.3} |",
                    r.method,
                    100.0 * r.overall_accuracy,
                    r.excess_risk
                );
            }
        }
    }
    out
}
