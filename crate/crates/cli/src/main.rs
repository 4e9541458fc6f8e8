use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use dorfl_core::experiment::{
    build_dataset, dataset_checksum, prepare_output_dir, run_experiment, sensitivity_sweep,
    sweep_csv, RunConfig,
};
use dorfl_core::model::Label;
use dorfl_core::verify;

#[derive(Parser)]
#[command(name = "dorfl", version, about = "Outlier-robust distributionally robust federated learning experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Common {
    /// TOML run configuration
    #[arg(long)]
    config: Option<PathBuf>,
    /// Overrides run.seed
    #[arg(long)]
    seed: Option<u64>,
    /// section.key=value override, applied after the config file
    #[arg(long = "set", value_name = "KEY=VALUE")]
    set: Vec<String>,
}

impl Common {
    fn load(&self) -> dorfl_core::Result<RunConfig> {
        let mut overrides = self.set.clone();
        if let Some(s) = self.seed {
            overrides.push(format!("run.seed={s}"));
        }
        RunConfig::load(self.config.as_deref(), &overrides)
    }
}

#[derive(Subcommand)]
enum Command {
    /// Train the configured methods and write reports
    Run {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long)]
        force: bool,
    },
    /// Prior-mean sensitivity sweep of DOR-FL on synthetic data
    Sweep {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long)]
        force: bool,
        /// Offsets in units along the standard-deviation direction
        #[arg(long, value_delimiter = ',', allow_hyphen_values = true,
              default_value = "-5,-4,-3,-2,-1,0,1,2,3,4,5")]
        offsets: Vec<f64>,
        #[arg(long, default_value_t = 1)]
        jobs: usize,
    },
    /// Run the oracle suites of the dual engine and the server projection
    Verify {
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Summarize the configured dataset
    InspectData {
        #[command(flatten)]
        common: Common,
    },
}

fn output_dir(flag: Option<PathBuf>, cfg: &RunConfig) -> PathBuf {
    flag.or_else(|| cfg.output_dir.clone())
        .unwrap_or_else(|| PathBuf::from("out"))
}

fn execute(cli: Cli) -> dorfl_core::Result<bool> {
    match cli.command {
        Command::Run { common, out, force } => {
            let cfg = common.load()?;
            let dir = output_dir(out, &cfg);
            for r in run_experiment(&cfg, &dir, force)? {
                println!(
                    "{}: accuracy {} worst-group {} excess-risk {}",
                    r.method, r.overall_accuracy, r.worst_group_accuracy, r.excess_risk
                );
            }
            println!("wrote {}", dir.display());
            Ok(true)
        }
        Command::Sweep {
            common,
            out,
            force,
            offsets,
            jobs,
        } => {
            let cfg = common.load()?;
            let dir = output_dir(out, &cfg);
            prepare_output_dir(&dir, force)?;
            let points = sensitivity_sweep(&cfg, &offsets, jobs)?;
            let path = dir.join("sweep.csv");
            std::fs::write(&path, sweep_csv(&points)).map_err(|e| dorfl_core::Error::Io {
                path: path.clone(),
                source: e,
            })?;
            for (m, a) in &points {
                println!("offset {m}: accuracy {a}");
            }
            println!("wrote {}", path.display());
            Ok(true)
        }
        Command::Verify { seed } => {
            let checks = verify::run_all(seed)?;
            for c in &checks {
                println!("{c}");
            }
            Ok(checks.iter().all(verify::CheckOutcome::passed))
        }
        Command::InspectData { common } => {
            let cfg = common.load()?;
            let data = build_dataset(&cfg)?;
            println!("dimension: {}", data.dim());
            println!("features: {}", data.feature_names.join(", "));
            for (k, c) in data.clients.iter().enumerate() {
                let bad = data.contaminated[k].iter().filter(|&&b| b).count();
                let pos = c.atoms().iter().filter(|s| s.label == Label::Positive).count();
                let test = data.test_groups.iter().filter(|&&g| g == k).count();
                println!(
                    "{}: {} training samples ({} contaminated, {} positive), {} test samples",
                    data.group_names[k],
                    c.len(),
                    bad,
                    pos,
                    test
                );
            }
            if let Some(t) = data.threshold {
                println!("standardized threshold: {t}");
            }
            println!("checksum: {}", dataset_checksum(&data));
            Ok(true)
        }
    }
}

fn main() -> ExitCode {
    match execute(Cli::parse()) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::FAILURE,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}
