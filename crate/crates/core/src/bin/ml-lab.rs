use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use ml_lab_core::harness::{
    config_from_manifest, run_experiment_with_threads, verdict_label, ExperimentConfig,
    ExperimentRegistry, RunOutcome,
};
use ml_lab_core::limits::Verdict;
use ml_lab_core::Result;

/// Local-time limit theorems: simulation, checks and transfer-operator spectra.
#[derive(Parser)]
#[command(name = "ml-lab", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Simulate paths and record local times at 0.
    Simulate(Common),
    /// Check l_n / a_n against the Mittag-Leffler law.
    VerifyMl(Common),
    /// Exceedance probabilities against the deviation band.
    Deviation(Common),
    /// Running maximum of the upper-limit statistic.
    Limsup(Common),
    /// Logarithmic averages along paths.
    Asclt(Common),
    /// Covariance decay, potential-kernel sums and related checks.
    Conditions(Common),
    /// Ulam spectrum of the twisted transfer operator.
    Spectrum(Common),
    /// Fit the scaling constants of an i.i.d. walk.
    Calibrate(Common),
    /// Repeat a run recorded in a manifest.json.
    Rerun {
        #[arg(long)]
        manifest: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        threads: Option<usize>,
    },
    /// Print every config key with its default.
    Defaults,
}

#[derive(Args)]
struct Common {
    /// Flat `key = value` config file.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Master seed.
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    paths: Option<usize>,
    #[arg(long)]
    horizon: Option<u64>,
    /// Output directory.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Worker threads (default: all cores).
    #[arg(long)]
    threads: Option<usize>,
    /// Any other key, as KEY=VALUE; may be repeated.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    set: Vec<String>,
}

impl Common {
    fn config(&self, experiment: &str) -> Result<ExperimentConfig> {
        let mut overrides = vec![("experiment".to_string(), experiment.to_string())];
        for kv in &self.set {
            let (k, v) = kv.split_once('=').ok_or_else(|| {
                ml_lab_core::Error::Config(format!("--set expects KEY=VALUE, got '{kv}'"))
            })?;
            overrides.push((k.trim().to_string(), v.trim().to_string()));
        }
        let mut push = |k: &str, v: Option<String>| {
            if let Some(v) = v {
                overrides.push((k.to_string(), v));
            }
        };
        push("master_seed", self.seed.map(|v| v.to_string()));
        push("paths", self.paths.map(|v| v.to_string()));
        push("horizon", self.horizon.map(|v| v.to_string()));
        push(
            "output_dir",
            self.out.as_ref().map(|p| p.display().to_string()),
        );
        ExperimentConfig::from_sources(self.config.as_deref(), &overrides)
    }
}

fn report(outcome: &RunOutcome) {
    for v in &outcome.verdicts {
        println!("{:<16} {}", v.verdict, v.check);
    }
    println!("results in {}", outcome.out_dir.display());
}

fn run(cli: Cli) -> Result<Option<RunOutcome>> {
    let (name, common) = match cli.command {
        Command::Defaults => {
            print!("{}", ExperimentConfig::documented_defaults());
            return Ok(None);
        }
        Command::Rerun {
            manifest,
            out,
            threads,
        } => {
            let cfg = config_from_manifest(&manifest, &out)?;
            return run_experiment_with_threads(&cfg, threads).map(Some);
        }
        Command::Simulate(c) => ("simulate", c),
        Command::VerifyMl(c) => ("verify-ml", c),
        Command::Deviation(c) => ("deviation", c),
        Command::Limsup(c) => ("limsup", c),
        Command::Asclt(c) => ("asclt", c),
        Command::Conditions(c) => ("conditions", c),
        Command::Spectrum(c) => ("spectrum", c),
        Command::Calibrate(c) => ("calibrate", c),
    };
    debug_assert!(ExperimentRegistry::builtin().get(name).is_ok());
    let cfg = common.config(name)?;
    run_experiment_with_threads(&cfg, common.threads).map(Some)
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    match run(Cli::parse()) {
        Ok(None) => ExitCode::SUCCESS,
        Ok(Some(outcome)) => {
            report(&outcome);
            if outcome.any_failed() {
                eprintln!(
                    "ml-lab: at least one check reported {}",
                    verdict_label(Verdict::Fail)
                );
            }
            ExitCode::from(outcome.exit_code() as u8)
        }
        Err(e) => {
            eprintln!("ml-lab: {e}");
            ExitCode::from(2)
        }
    }
}
