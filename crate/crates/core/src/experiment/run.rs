use std::fs;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use sha2::{Digest, Sha256};

use crate::baselines::run_baseline;
use crate::datasets::{generate_synthetic, load_adult, FederatedDataset};
use crate::error::{Error, Result};
use crate::federation::{run_training, TrainingTrace};
use crate::model::{norm, OutlierScore};

use super::config::{DatasetKind, Method, RunConfig};
use super::evaluate::{evaluate_with_oracle, oracle_loss};
use super::report::{comparison_table, MetricsReport};

pub fn build_dataset(cfg: &RunConfig) -> Result<FederatedDataset> {
    match cfg.dataset {
        DatasetKind::Synthetic => generate_synthetic(&cfg.synthetic),
        DatasetKind::Adult => load_adult(&cfg.adult),
    }
}

/// Dataset checksum: the source files' digest for Adult, a digest of the
/// generated training data otherwise.
pub fn dataset_checksum(data: &FederatedDataset) -> String {
    match &data.checksum {
        Some(c) => c.clone(),
        None => hex::encode(Sha256::digest(data.training_csv().as_bytes())),
    }
}

/// Output of one method on a prepared dataset.
#[derive(Debug, Clone)]
pub struct MethodRun {
    pub report: MetricsReport,
    pub trace: TrainingTrace,
}

/// Trains `method` and evaluates its averaged parameter. Baselines ignore
/// the outlier score.
pub fn run_method(
    cfg: &RunConfig,
    data: &FederatedDataset,
    method: Method,
    score: &OutlierScore,
    oracle: f64,
) -> Result<MethodRun> {
    let trace = match method.baseline() {
        None => run_training(&data.clients, &cfg.hyper, score, cfg.seed)?,
        Some(kind) => run_baseline(kind, &data.clients, &cfg.hyper, cfg.seed)?,
    };
    let eval = evaluate_with_oracle(&trace.theta_bar, data, oracle)?;
    let echoed = match method {
        Method::Dorfl => score.clone(),
        _ => OutlierScore::None,
    };
    let last = trace.rounds.last().expect("rounds > 0");
    let report = MetricsReport {
        method,
        dataset: cfg.dataset,
        seed: cfg.seed,
        overall_accuracy: eval.overall_accuracy,
        group_names: data.group_names.clone(),
        group_accuracy: eval.group_accuracy,
        worst_group_accuracy: eval.worst_group_accuracy,
        excess_risk: eval.excess_risk,
        test_loss: eval.test_loss,
        checksum: dataset_checksum(data),
        rounds: trace.rounds.len(),
        final_gap_surrogate: last.gap_surrogate,
        final_lambda: last.lambda.clone(),
        theta_bar: trace.theta_bar.clone(),
        config: cfg.echo(&echoed),
    };
    Ok(MethodRun { report, trace })
}

/// Trains every configured method on one dataset, sequentially.
pub fn run_methods(cfg: &RunConfig) -> Result<Vec<MethodRun>> {
    let data = build_dataset(cfg)?;
    let score = cfg.resolve_score(&data)?;
    let oracle = oracle_loss(&data)?;
    cfg.methods
        .iter()
        .map(|&m| run_method(cfg, &data, m, &score, oracle))
        .collect()
}

/// Creates `dir`, refusing when it already holds files unless `force`.
pub fn prepare_output_dir(dir: &Path, force: bool) -> Result<()> {
    if dir.exists() {
        let occupied = fs::read_dir(dir)
            .map_err(|e| Error::io(dir, e))?
            .next()
            .is_some();
        if occupied && !force {
            return Err(Error::OutputExists(dir.to_path_buf()));
        }
    }
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))
}

fn write(path: PathBuf, text: &str) -> Result<()> {
    if let Some(parent) = path.parent() {
        fs::create_dir_all(parent).map_err(|e| Error::io(parent, e))?;
    }
    fs::write(&path, text).map_err(|e| Error::io(path, e))
}

/// Writes reports, traces, the comparison table and plot data. A single
/// run goes directly into `dir`; several runs get one subdirectory each.
pub fn emit_reports(runs: &[MethodRun], dir: &Path, force: bool) -> Result<()> {
    prepare_output_dir(dir, force)?;
    match runs {
        [] => Ok(()),
        [one] => {
            write(dir.join("report.csv"), &one.report.to_csv()?)?;
            write(dir.join("trace.csv"), &one.trace.to_csv(false))?;
            write(dir.join("plotdata").join("gap.csv"), &gap_csv(runs))
        }
        _ => {
            for r in runs {
                let sub = dir.join(r.report.method.as_str());
                write(sub.join("report.csv"), &r.report.to_csv()?)?;
                write(sub.join("trace.csv"), &r.trace.to_csv(false))?;
            }
            let reports: Vec<MetricsReport> = runs.iter().map(|r| r.report.clone()).collect();
            write(dir.join("table.md"), &comparison_table(&reports))?;
            write(dir.join("plotdata").join("accuracy.csv"), &accuracy_csv(&reports))?;
            write(dir.join("plotdata").join("gap.csv"), &gap_csv(runs))
        }
    }
}

fn accuracy_csv(reports: &[MetricsReport]) -> String {
    let mut out = String::from("method,group,accuracy\n");
    for r in reports {
        out.push_str(&format!("{},overall,{}\n", r.method, r.overall_accuracy));
        for (name, a) in r.group_names.iter().zip(&r.group_accuracy) {
            out.push_str(&format!("{},{},{}\n", r.method, name, a));
        }
    }
    out
}

/// Monitored rounds only: `method,round,gap_surrogate,theta_norm`.
fn gap_csv(runs: &[MethodRun]) -> String {
    let mut out = String::from("method,round,gap_surrogate,theta_norm\n");
    for r in runs {
        for rec in &r.trace.rounds {
            if let Some(g) = rec.gap_surrogate {
                out.push_str(&format!(
                    "{},{},{},{}\n",
                    r.trace.method,
                    rec.round,
                    g,
                    norm(&rec.theta)
                ));
            }
        }
    }
    out
}

/// Runs every configured method and writes the outputs.
pub fn run_experiment(cfg: &RunConfig, dir: &Path, force: bool) -> Result<Vec<MetricsReport>> {
    // Check before spending time on training.
    if dir.exists() && !force && fs::read_dir(dir).map_err(|e| Error::io(dir, e))?.next().is_some() {
        return Err(Error::OutputExists(dir.to_path_buf()));
    }
    let runs = run_methods(cfg)?;
    emit_reports(&runs, dir, force)?;
    Ok(runs.into_iter().map(|r| r.report).collect())
}

/// Prior mean used at sweep offset `m`: the nominal clean mean moved by
/// `m` along the unit vector of per-feature standard deviations.
pub fn sweep_prior_mean(data: &FederatedDataset, offset: f64) -> Vec<f64> {
    let stds: Vec<f64> = data.feature_stats.iter().map(|s| s.std).collect();
    let n = norm(&stds);
    data.feature_stats
        .iter()
        .map(|s| s.mean + offset * s.std / n)
        .collect()
}

/// DOR-FL overall accuracy for each prior-mean offset. Runs fan out over
/// `jobs` worker threads; results keep the order of `offsets`.
pub fn sensitivity_sweep(cfg: &RunConfig, offsets: &[f64], jobs: usize) -> Result<Vec<(f64, f64)>> {
    if cfg.dataset != DatasetKind::Synthetic {
        return Err(Error::config("the sensitivity sweep needs the synthetic dataset"));
    }
    if cfg.score.variant.as_deref().is_some_and(|v| v != "quadratic") {
        return Err(Error::config("the sensitivity sweep needs the quadratic score"));
    }
    let data = build_dataset(cfg)?;
    let base = cfg.resolve_score(&data)?;
    let OutlierScore::Quadratic { rho2, .. } = base else {
        unreachable!("resolved variant is quadratic");
    };
    let oracle = oracle_loss(&data)?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(jobs.max(1))
        .build()
        .map_err(|e| Error::config(format!("thread pool: {e}")))?;
    pool.install(|| {
        offsets
            .par_iter()
            .map(|&m| {
                let score = OutlierScore::Quadratic {
                    rho2,
                    prior_mean: sweep_prior_mean(&data, m),
                };
                let run = run_method(cfg, &data, Method::Dorfl, &score, oracle)?;
                Ok((m, run.report.overall_accuracy))
            })
            .collect()
    })
}

pub fn sweep_csv(points: &[(f64, f64)]) -> String {
    let mut out = String::from("offset,accuracy\n");
    for (m, a) in points {
        out.push_str(&format!("{m},{a}\n"));
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small() -> RunConfig {
        RunConfig::parse(
            "[hyper]\nrho = 5.0\nrounds = 30\nmonitor_every = 10\n[synthetic]\nsizes = [20, 30, 40]\ntest_size_per_client = 50\n",
            &[],
        )
        .unwrap()
    }

    #[test]
    fn reports_are_deterministic_and_complete() {
        let cfg = RunConfig {
            methods: Method::ALL.to_vec(),
            ..small()
        };
        let a = run_methods(&cfg).unwrap();
        let b = run_methods(&cfg).unwrap();
        assert_eq!(a.len(), 4);
        for (x, y) in a.iter().zip(&b) {
            assert_eq!(x.report.to_csv().unwrap(), y.report.to_csv().unwrap());
            let r = &x.report;
            assert_eq!(r.group_accuracy.len(), 3);
            assert_eq!(r.worst_group_accuracy, r.group_accuracy.iter().copied().fold(1.0, f64::min));
            assert!(r.excess_risk >= -1e-9);
            assert_eq!(r.rounds, 30);
            assert!(r.final_gap_surrogate.is_some());
        }
        // Baselines echo no outlier score.
        let wafl = &a[3].report;
        assert!(wafl.config.contains(&("score.variant".into(), "none".into())));
    }

    #[test]
    fn output_dir_does_not_change_results() {
        let tmp = tempfile::tempdir().unwrap();
        let cfg = small();
        let a = run_experiment(&cfg, &tmp.path().join("a"), false).unwrap();
        let b = run_experiment(&cfg, &tmp.path().join("b"), false).unwrap();
        assert_eq!(a, b);
        let ra = fs::read_to_string(tmp.path().join("a/report.csv")).unwrap();
        let rb = fs::read_to_string(tmp.path().join("b/report.csv")).unwrap();
        assert_eq!(ra, rb);
        assert_eq!(MetricsReport::from_csv(&ra).unwrap(), a[0]);
        assert!(!tmp.path().join("a/table.md").exists());
        assert!(matches!(run_experiment(&cfg, &tmp.path().join("a"), false), Err(Error::OutputExists(_))));
        assert!(run_experiment(&cfg, &tmp.path().join("a"), true).is_ok());
    }

    #[test]
    fn multi_method_layout() {
        let tmp = tempfile::tempdir().unwrap();
        let cfg = RunConfig {
            methods: Method::ALL.to_vec(),
            ..small()
        };
        run_experiment(&cfg, tmp.path(), false).unwrap();
        for m in Method::ALL {
            assert!(tmp.path().join(m.as_str()).join("report.csv").exists());
            assert!(tmp.path().join(m.as_str()).join("trace.csv").exists());
        }
        let table = fs::read_to_string(tmp.path().join("table.md")).unwrap();
        assert_eq!(table.lines().count(), 6);
        assert!(tmp.path().join("plotdata/accuracy.csv").exists());
    }

    #[test]
    fn zero_offset_reproduces_base_run() {
        let cfg = small();
        let data = build_dataset(&cfg).unwrap();
        let mean: Vec<f64> = data.feature_stats.iter().map(|s| s.mean).collect();
        assert_eq!(sweep_prior_mean(&data, 0.0), mean);
        let mut base_cfg = cfg.clone();
        base_cfg.score.prior_mean = Some(mean);
        let base = run_methods(&base_cfg).unwrap().remove(0).report.overall_accuracy;
        let sweep = sensitivity_sweep(&cfg, &[0.0, 1.0], 2).unwrap();
        assert_eq!(sweep[0], (0.0, base));
        assert_eq!(sweep, sensitivity_sweep(&cfg, &[0.0, 1.0], 1).unwrap());
        let moved = sweep_prior_mean(&data, 2.0);
        let d: Vec<f64> = moved.iter().zip(&sweep_prior_mean(&data, 0.0)).map(|(a, b)| a - b).collect();
        assert!((norm(&d) - 2.0).abs() < 1e-12);
    }
}
