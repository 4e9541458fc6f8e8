use std::fs;
use std::path::Path;
use std::process::{Command, Output};

const SMALL: [&str; 8] = [
    "--set",
    "hyper.rounds=40",
    "--set",
    "hyper.rho=5.0",
    "--set",
    "synthetic.sizes=[30, 30, 40]",
    "--set",
    "synthetic.test_size_per_client=100",
];

fn dorfl(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_dorfl"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn run_into(dir: &Path, extra: &[&str]) -> Output {
    let mut args = vec!["run", "--out", dir.to_str().unwrap()];
    args.extend(SMALL);
    args.extend(extra);
    dorfl(&args)
}

#[test]
fn run_writes_reports_and_refuses_to_overwrite() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("a");
    let first = run_into(&out, &[]);
    assert!(first.status.success(), "{}", String::from_utf8_lossy(&first.stderr));
    let report = fs::read_to_string(out.join("report.csv")).unwrap();
    assert!(report.starts_with("key,value\nmethod,dorfl\n"));
    assert!(report.contains("config.hyper.rounds,40\n"));
    assert!(out.join("trace.csv").exists());
    assert!(!out.join("table.md").exists());

    let again = run_into(&out, &[]);
    assert!(!again.status.success());
    assert!(String::from_utf8_lossy(&again.stderr).contains("--force"));
    assert_eq!(fs::read_to_string(out.join("report.csv")).unwrap(), report);

    let forced = run_into(&out, &["--force"]);
    assert!(forced.status.success());
    // Same config and seed: byte-identical report.
    assert_eq!(fs::read_to_string(out.join("report.csv")).unwrap(), report);
}

#[test]
fn seed_flag_and_method_list() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("m");
    let r = run_into(&out, &["--seed", "3", "--set", "run.methods=[\"dorfl\", \"erm\", \"afl\", \"wafl\"]"]);
    assert!(r.status.success(), "{}", String::from_utf8_lossy(&r.stderr));
    let table = fs::read_to_string(out.join("table.md")).unwrap();
    assert_eq!(table.lines().count(), 6);
    for m in ["dorfl", "erm", "afl", "wafl"] {
        let rep = fs::read_to_string(out.join(m).join("report.csv")).unwrap();
        assert!(rep.contains("\nseed,3\n"));
    }
    assert!(out.join("plotdata/accuracy.csv").exists());
}

#[test]
fn config_file_with_flag_overrides() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = tmp.path().join("run.toml");
    fs::write(&cfg, "[hyper]\nrho = 5.0\nrounds = 25\n\n[synthetic]\nsizes = [20, 20, 20]\ntest_size_per_client = 50\n").unwrap();
    let out = tmp.path().join("o");
    let r = dorfl(&["run", "--config", cfg.to_str().unwrap(), "--set", "hyper.rounds=30", "--out", out.to_str().unwrap()]);
    assert!(r.status.success(), "{}", String::from_utf8_lossy(&r.stderr));
    let rep = fs::read_to_string(out.join("report.csv")).unwrap();
    assert!(rep.contains("trace.rounds,30\n"));
    assert!(rep.contains("config.hyper.rho,5\n"));
}

#[test]
fn bad_input_exits_nonzero() {
    let tmp = tempfile::tempdir().unwrap();
    let r = dorfl(&["run", "--set", "hyper.rho=-1", "--out", tmp.path().join("x").to_str().unwrap()]);
    assert_eq!(r.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&r.stderr).contains("rho"));
    let r = dorfl(&["run", "--config", tmp.path().join("missing.toml").to_str().unwrap()]);
    assert_eq!(r.status.code(), Some(2));
    let r = dorfl(&["inspect-data", "--set", "run.dataset=adult", "--set", "adult.train_path=/nonexistent/adult.data"]);
    assert_eq!(r.status.code(), Some(2));
}

#[test]
fn sweep_writes_two_column_csv() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("s");
    let mut args = vec!["sweep", "--out", out.to_str().unwrap(), "--offsets=-1,0,1", "--jobs", "2"];
    args.extend(SMALL);
    let r = dorfl(&args);
    assert!(r.status.success(), "{}", String::from_utf8_lossy(&r.stderr));
    let csv = fs::read_to_string(out.join("sweep.csv")).unwrap();
    let lines: Vec<&str> = csv.lines().collect();
    assert_eq!(lines[0], "offset,accuracy");
    assert_eq!(lines.len(), 4);
    assert!(lines[1].starts_with("-1,"));
}

#[test]
fn verify_and_inspect() {
    let v = dorfl(&["verify"]);
    assert!(v.status.success());
    let text = String::from_utf8_lossy(&v.stdout);
    assert_eq!(text.lines().filter(|l| l.starts_with("PASS")).count(), 7);

    let i = dorfl(&["inspect-data"]);
    assert!(i.status.success());
    let text = String::from_utf8_lossy(&i.stdout);
    assert!(text.contains("client3: 500 training samples (50 contaminated"));
    assert!(text.contains("checksum: "));
}
