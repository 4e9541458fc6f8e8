//! Acceptance checks. Prints one PASS/FAIL/SKIP line per criterion.
//!
//! Every line is printed regardless of outcome. The process exits nonzero
//! when a criterion errors or a correctness criterion fails; shortfalls on
//! the empirical reproduction targets are reported but do not abort the run.

use std::path::Path;
use std::time::{Duration, Instant};

use dorfl_core::baselines::run_baseline;
use dorfl_core::datasets::{generate_synthetic, AdultConfig, SyntheticConfig};
use dorfl_core::experiment::{
    evaluate_with_oracle, oracle_loss, run_methods, sensitivity_sweep, DatasetKind, Method,
    MetricsReport, RunConfig, ADULT_DIR_ENV,
};
use dorfl_core::federation::{minimax_reference, run_training};
use dorfl_core::verify::{self, CheckOutcome};
use dorfl_core::{HyperParams, OutlierScore};

#[derive(Clone, Copy, PartialEq, Eq, Debug)]
enum Status {
    Pass,
    Fail,
    Skip,
}

struct Line {
    id: u32,
    title: &'static str,
    status: Status,
    detail: String,
    /// Correctness criteria must pass; reproduction targets may fall short.
    required: bool,
}

fn within(elapsed: Duration, limit_secs: u64) -> bool {
    elapsed <= Duration::from_secs(limit_secs)
}

fn from_checks(checks: &[CheckOutcome], elapsed: Duration, limit_secs: u64) -> (Status, String) {
    let ok = checks.iter().all(CheckOutcome::passed) && within(elapsed, limit_secs);
    let mut detail: Vec<String> = checks
        .iter()
        .map(|c| format!("{} worst {:e} (tol {:e}, {} cases)", c.name, c.worst, c.tolerance, c.cases))
        .collect();
    detail.push(format!("{:.2}s of {limit_secs}s", elapsed.as_secs_f64()));
    (if ok { Status::Pass } else { Status::Fail }, detail.join("; "))
}

fn timed<T>(f: impl FnOnce() -> T) -> (T, Duration) {
    let t = Instant::now();
    let v = f();
    (v, t.elapsed())
}

const SEED: u64 = 0;

fn criterion_1() -> dorfl_core::Result<(Status, String)> {
    let (c, e) = timed(|| verify::certificate_exactness(SEED, 50));
    Ok(from_checks(&[c?], e, 10))
}

fn criterion_2() -> dorfl_core::Result<(Status, String)> {
    let (c, e) = timed(verify::strong_duality);
    Ok(from_checks(&c?, e, 30))
}

fn criterion_3() -> dorfl_core::Result<(Status, String)> {
    let (c, e) = timed(|| verify::lemma1_inequality(SEED, 100));
    Ok(from_checks(&[c?], e, 30))
}

fn criterion_4() -> dorfl_core::Result<(Status, String)> {
    let (c, e) = timed(|| verify::gradient_fidelity(SEED, 20));
    Ok(from_checks(&c?, e, 600))
}

fn criterion_5() -> dorfl_core::Result<(Status, String)> {
    let (c, e) = timed(|| verify::simplex_projection(SEED, 1000));
    Ok(from_checks(&[c?], e, 600))
}

const CONVERGENCE_HORIZONS: [usize; 5] = [100, 316, 1000, 3162, 10_000];
const CONVERGENCE_SUBSEEDS: u64 = 5;

struct ConvergenceToy {
    clients: Vec<dorfl_core::DiscreteDistribution>,
    score: OutlierScore,
    hp: HyperParams,
}

fn convergence_toy() -> dorfl_core::Result<ConvergenceToy> {
    let cfg = SyntheticConfig {
        sizes: vec![50, 50, 50],
        test_size_per_client: 10,
        seed: SEED,
        ..SyntheticConfig::default()
    };
    let data = generate_synthetic(&cfg)?;
    let score = OutlierScore::Quadratic {
        rho2: 0.5,
        prior_mean: data.pooled_feature_median(),
    };
    Ok(ConvergenceToy {
        clients: data.clients,
        score,
        hp: HyperParams::default(),
    })
}

/// Mean surrogate of `θ̄_T` over sub-seeds, with `η = 1/√T`.
fn mean_surrogate(toy: &ConvergenceToy, rounds: usize, inner_tol: f64) -> dorfl_core::Result<f64> {
    let hp = HyperParams {
        inner_tol,
        monitor_every: rounds,
        ..HyperParams::with_rounds(rounds)
    };
    let hp = HyperParams { rho: toy.hp.rho, beta: toy.hp.beta, ..hp };
    let mut total = 0.0;
    for s in 0..CONVERGENCE_SUBSEEDS {
        let trace = run_training(&toy.clients, &hp, &toy.score, 1000 + s)?;
        total += trace.rounds.last().and_then(|r| r.gap_surrogate).expect("last round is monitored");
    }
    Ok(total / CONVERGENCE_SUBSEEDS as f64)
}

fn slope(xs: &[f64], ys: &[f64]) -> f64 {
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxy: f64 = xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    sxy / sxx
}

fn criterion_6() -> dorfl_core::Result<(Status, String)> {
    let start = Instant::now();
    let toy = convergence_toy()?;
    let reference = minimax_reference(&toy.clients, &toy.hp, &toy.score, 1e-10)?;
    let floor = reference.value;
    let mut gaps = Vec::new();
    for &t in &CONVERGENCE_HORIZONS {
        gaps.push(mean_surrogate(&toy, t, toy.hp.inner_tol)? - floor);
    }
    let t_max = *CONVERGENCE_HORIZONS.last().unwrap();
    let tighter = mean_surrogate(&toy, t_max, toy.hp.inner_tol / 10.0)? - floor;
    let eps_floor = (tighter - gaps[gaps.len() - 1]).abs();
    let positive = gaps.iter().all(|g| *g > 0.0);
    let xs: Vec<f64> = CONVERGENCE_HORIZONS.iter().map(|&t| (t as f64).ln()).collect();
    let ys: Vec<f64> = gaps.iter().map(|g| g.max(1e-300).ln()).collect();
    let s = slope(&xs, &ys);
    let elapsed = start.elapsed();
    let ok = positive && s <= -0.35 && within(elapsed, 300);
    let detail = format!(
        "slope {s:.3} (need <= -0.35); gaps {:?} above floor {floor:.6} (bracket width {:.1e}); inner_tol/10 shift {eps_floor:.2e}; {:.1}s of 300s",
        gaps.iter().map(|g| format!("{g:.3e}")).collect::<Vec<_>>(),
        reference.value - reference.lower,
        elapsed.as_secs_f64()
    );
    Ok((if ok { Status::Pass } else { Status::Fail }, detail))
}

const TABLE_SEEDS: [u64; 3] = [0, 1, 2];

fn table_config(seed: u64) -> dorfl_core::Result<RunConfig> {
    RunConfig::parse(
        "[run]\nmethods = [\"dorfl\", \"erm\", \"afl\", \"wafl\"]\n",
        &[format!("run.seed={seed}")],
    )
}

fn table_reports(seed: u64) -> dorfl_core::Result<Vec<MetricsReport>> {
    Ok(run_methods(&table_config(seed)?)?
        .into_iter()
        .map(|r| r.report)
        .collect())
}

fn criterion_7() -> dorfl_core::Result<(Status, String)> {
    let mut ok = true;
    let mut parts = Vec::new();
    let mut slowest: f64 = 0.0;
    for seed in TABLE_SEEDS {
        let cfg = table_config(seed)?;
        let data = dorfl_core::experiment::build_dataset(&cfg)?;
        let score = cfg.resolve_score(&data)?;
        let oracle = oracle_loss(&data)?;
        let mut acc = std::collections::HashMap::new();
        let mut groups = std::collections::HashMap::new();
        for m in Method::ALL {
            let (run, e) = timed(|| dorfl_core::experiment::run_method(&cfg, &data, m, &score, oracle));
            let run = run?;
            slowest = slowest.max(e.as_secs_f64());
            acc.insert(m, run.report.overall_accuracy);
            groups.insert(m, run.report.group_accuracy);
        }
        let d = acc[&Method::Dorfl];
        let w = acc[&Method::Wafl];
        let a = acc[&Method::Afl];
        let best_everywhere = (0..groups[&Method::Dorfl].len()).all(|g| {
            Method::ALL
                .iter()
                .all(|m| groups[&Method::Dorfl][g] >= groups[m][g])
        });
        let seed_ok = d >= 0.90 && d - w >= 0.05 && w - a >= 0.05 && best_everywhere;
        ok &= seed_ok;
        parts.push(format!(
            "seed {seed}: dorfl {d:.3} wafl {w:.3} afl {a:.3} erm {:.3} dorfl-best-every-group {best_everywhere}",
            acc[&Method::Erm]
        ));
    }
    ok &= slowest <= 120.0;
    parts.push(format!("slowest method {slowest:.2}s of 120s"));
    Ok((if ok { Status::Pass } else { Status::Fail }, parts.join("; ")))
}

fn criterion_8() -> dorfl_core::Result<(Status, String)> {
    let start = Instant::now();
    let cfg = RunConfig::parse("", &[format!("run.seed={SEED}")])?;
    let offsets: Vec<f64> = (-5..=5).map(f64::from).collect();
    let jobs = std::thread::available_parallelism().map_or(1, |n| n.get());
    let points = sensitivity_sweep(&cfg, &offsets, jobs)?;
    let accs: Vec<f64> = points.iter().map(|p| p.1).collect();
    let max = accs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let min = accs.iter().copied().fold(f64::INFINITY, f64::min);
    let elapsed = start.elapsed();
    let ok = max - min <= 0.10 && within(elapsed, 900);
    let at = |m: f64| points.iter().find(|p| p.0 == m).map(|p| p.1).unwrap();
    let detail = format!(
        "range {:.1} points (need <= 10); accuracy at -5/0/+5: {:.3}/{:.3}/{:.3}; {:.1}s of 900s",
        100.0 * (max - min),
        at(-5.0),
        at(0.0),
        at(5.0),
        elapsed.as_secs_f64()
    );
    Ok((if ok { Status::Pass } else { Status::Fail }, detail))
}

fn criterion_9() -> dorfl_core::Result<(Status, String)> {
    let Some(dir) = std::env::var_os(ADULT_DIR_ENV) else {
        return Ok((Status::Skip, format!("{ADULT_DIR_ENV} is not set")));
    };
    let paths = AdultConfig::in_dir(Path::new(&dir));
    if !paths.train_path.exists() || !paths.test_path.exists() {
        return Ok((Status::Skip, format!("Adult files not found in {}", Path::new(&dir).display())));
    }
    let start = Instant::now();
    let mut cfg = RunConfig::parse(
        "[run]\ndataset = \"adult\"\nmethods = [\"dorfl\", \"erm\", \"afl\"]\n",
        &[format!("run.seed={SEED}")],
    )?;
    cfg.dataset = DatasetKind::Adult;
    cfg.adult = paths;
    let reports: Vec<MetricsReport> = run_methods(&cfg)?.into_iter().map(|r| r.report).collect();
    let get = |m: Method| reports.iter().find(|r| r.method == m).unwrap();
    let (d, e, a) = (get(Method::Dorfl), get(Method::Erm), get(Method::Afl));
    let elapsed = start.elapsed();
    let ok = d.overall_accuracy >= e.overall_accuracy - 0.005
        && d.worst_group_accuracy >= a.worst_group_accuracy
        && d.excess_risk <= e.excess_risk + 0.02
        && within(elapsed, 600);
    let detail = format!(
        "accuracy dorfl {:.4} erm {:.4}; worst group dorfl {:.4} afl {:.4}; excess risk dorfl {:.4} erm {:.4}; {:.1}s of 600s",
        d.overall_accuracy,
        e.overall_accuracy,
        d.worst_group_accuracy,
        a.worst_group_accuracy,
        d.excess_risk,
        e.excess_risk,
        elapsed.as_secs_f64()
    );
    Ok((if ok { Status::Pass } else { Status::Fail }, detail))
}

fn criterion_10() -> dorfl_core::Result<(Status, String)> {
    let mut same = Vec::new();
    let a = verify::certificate_exactness(SEED, 50)?;
    let b = verify::certificate_exactness(SEED, 50)?;
    same.push(("certificate", a.worst.to_bits() == b.worst.to_bits()));
    let a = verify::gradient_fidelity(SEED, 5)?;
    let b = verify::gradient_fidelity(SEED, 5)?;
    same.push(("gradients", a == b));

    let toy = convergence_toy()?;
    let a = mean_surrogate(&toy, 316, toy.hp.inner_tol)?;
    let b = mean_surrogate(&toy, 316, toy.hp.inner_tol)?;
    same.push(("convergence", a.to_bits() == b.to_bits()));

    let a: Vec<String> = table_reports(SEED)?.iter().map(|r| r.to_csv()).collect::<Result<_, _>>()?;
    let b: Vec<String> = table_reports(SEED)?.iter().map(|r| r.to_csv()).collect::<Result<_, _>>()?;
    same.push(("reports", a == b));

    let cfg = table_config(SEED)?;
    let data = dorfl_core::experiment::build_dataset(&cfg)?;
    let oracle = oracle_loss(&data)?;
    let t1 = run_baseline(dorfl_core::baselines::BaselineKind::Afl, &data.clients, &cfg.hyper, SEED)?;
    let t2 = run_baseline(dorfl_core::baselines::BaselineKind::Afl, &data.clients, &cfg.hyper, SEED)?;
    let e1 = evaluate_with_oracle(&t1.theta_bar, &data, oracle)?;
    let e2 = evaluate_with_oracle(&t2.theta_bar, &data, oracle)?;
    same.push(("traces", t1.theta_bar == t2.theta_bar && e1 == e2));

    let ok = same.iter().all(|s| s.1);
    let detail = same
        .iter()
        .map(|(n, s)| format!("{n} {}", if *s { "identical" } else { "DIFFERENT" }))
        .collect::<Vec<_>>()
        .join(", ");
    Ok((if ok { Status::Pass } else { Status::Fail }, detail))
}

fn main() {
    type Check = fn() -> dorfl_core::Result<(Status, String)>;
    let criteria: [(u32, &str, bool, Check); 10] = [
        (1, "certificate exactness", true, criterion_1),
        (2, "strong duality on 1-D toys", true, criterion_2),
        (3, "unbalanced transport bound", true, criterion_3),
        (4, "gradient fidelity", true, criterion_4),
        (5, "simplex projection", true, criterion_5),
        (6, "convergence trend", false, criterion_6),
        (7, "synthetic method ordering", false, criterion_7),
        (8, "prior-mean sensitivity", false, criterion_8),
        (9, "Adult comparison", false, criterion_9),
        (10, "determinism", true, criterion_10),
    ];
    let only: Option<u32> = std::env::args().skip(1).find_map(|a| a.parse().ok());
    let mut lines = Vec::new();
    let mut errored = false;
    for (id, title, required, check) in criteria {
        if only.is_some_and(|o| o != id) {
            continue;
        }
        let (status, detail) = match check() {
            Ok(v) => v,
            Err(e) => {
                errored = true;
                (Status::Fail, format!("error: {e}"))
            }
        };
        let line = Line {
            id,
            title,
            status,
            detail,
            required,
        };
        println!(
            "{} criterion {} ({}): {}",
            match line.status {
                Status::Pass => "PASS",
                Status::Fail => "FAIL",
                Status::Skip => "SKIP",
            },
            line.id,
            line.title,
            line.detail
        );
        lines.push(line);
    }
    let count = |s: Status| lines.iter().filter(|l| l.status == s).count();
    println!(
        "acceptance: {} passed, {} failed, {} skipped",
        count(Status::Pass),
        count(Status::Fail),
        count(Status::Skip)
    );
    let hard_failure = lines.iter().any(|l| l.required && l.status == Status::Fail);
    if errored || hard_failure {
        std::process::exit(1);
    }
}
