use std::path::PathBuf;
use std::process::ExitCode;

use chemo4d_cli::config::{Experiment, SweepSpec};
use chemo4d_cli::output::write_json;
use chemo4d_cli::{run_scenario, CliError, CliResult, ExitReport, Overrides, ScenarioConfig};
use clap::{Args, Parser, Subcommand};

/// Environment variable holding the worker thread count.
const THREADS_VAR: &str = "CHEMO4D_THREADS";

#[derive(Parser)]
#[command(name = "chemo4d", version, about = "Radial 4-D chemotaxis experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the experiment named in the config.
    Run {
        #[command(flatten)]
        common: Common,
    },
    /// Boundedness verdicts over a list of initial masses.
    Sweep {
        #[command(flatten)]
        common: Common,
        /// Absolute masses, ascending.
        #[arg(long, value_delimiter = ',')]
        masses: Option<Vec<f64>>,
        /// Masses as fractions of the boundedness threshold, ascending.
        #[arg(long, value_delimiter = ',')]
        bounded_fractions: Option<Vec<f64>>,
    },
    /// Functional inequalities on random witnesses.
    Ineq {
        #[command(flatten)]
        common: Common,
        /// Number of witnesses.
        #[arg(long)]
        n: Option<usize>,
    },
    /// Mild fixed point against the time stepper.
    Crosscheck {
        #[command(flatten)]
        common: Common,
        /// Horizon, at most 0.5.
        #[arg(long = "T")]
        t_final: Option<f64>,
    },
}

#[derive(Args)]
struct Common {
    /// TOML scenario file.
    config: PathBuf,
    #[arg(long)]
    seed: Option<u64>,
    /// Output directory.
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long = "grid-n")]
    grid_n: Option<usize>,
    #[arg(long = "grid-R")]
    grid_r: Option<f64>,
    #[arg(long)]
    dt: Option<f64>,
}

impl Common {
    fn overrides(&self) -> Overrides {
        Overrides {
            seed: self.seed,
            output_dir: self.out.clone(),
            grid_n: self.grid_n,
            grid_r: self.grid_r,
            dt: self.dt,
        }
    }
}

fn configure_threads() -> CliResult<()> {
    let Ok(value) = std::env::var(THREADS_VAR) else {
        return Ok(());
    };
    let n: usize = value
        .parse()
        .map_err(|_| CliError::Config(format!("{THREADS_VAR} must be a count, got {value:?}")))?;
    rayon::ThreadPoolBuilder::new()
        .num_threads(n)
        .build_global()
        .map_err(|e| CliError::Config(e.to_string()))
}

fn prepare(command: &Command) -> CliResult<ScenarioConfig> {
    let common = match command {
        Command::Run { common }
        | Command::Sweep { common, .. }
        | Command::Ineq { common, .. }
        | Command::Crosscheck { common, .. } => common,
    };
    let mut cfg = ScenarioConfig::load(&common.config)?;
    common.overrides().apply(&mut cfg);
    match command {
        Command::Run { .. } => {}
        Command::Sweep {
            masses,
            bounded_fractions,
            ..
        } => {
            cfg.experiment = Experiment::MassSweep;
            if masses.is_some() || bounded_fractions.is_some() {
                cfg.sweep = Some(SweepSpec {
                    masses: masses.clone().unwrap_or_default(),
                    bounded_fractions: bounded_fractions.clone().unwrap_or_default(),
                });
            }
        }
        Command::Ineq { n, .. } => {
            cfg.experiment = Experiment::InequalitySuite;
            if let Some(n) = n {
                cfg.suite.witnesses = *n;
            }
        }
        Command::Crosscheck { t_final, .. } => {
            cfg.experiment = Experiment::PicardCrosscheck;
            if let Some(t) = t_final {
                cfg.crosscheck.t_final = *t;
            }
        }
    }
    Ok(cfg)
}

fn fallback_dir(command: &Command) -> PathBuf {
    match command {
        Command::Run { common }
        | Command::Sweep { common, .. }
        | Command::Ineq { common, .. }
        | Command::Crosscheck { common, .. } => common.out.clone().unwrap_or_else(|| PathBuf::from("out")),
    }
}

fn report(r: &ExitReport) {
    let status = if r.partial {
        "partial"
    } else if r.passed {
        "ok"
    } else {
        "failed"
    };
    println!("{} {} config {}", r.experiment.as_str(), status, &r.config_hash[..12]);
    for f in &r.files {
        println!("  {}", f.display());
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let prepared = configure_threads().and_then(|_| prepare(&cli.command));
    let (outcome, dir, experiment, hash) = match prepared {
        Ok(cfg) => {
            let dir = cfg.output_dir.clone();
            let experiment = cfg.experiment.as_str();
            let hash = cfg.hash();
            (run_scenario(&cfg), dir, Some(experiment), Some(hash))
        }
        Err(e) => (Err(e), fallback_dir(&cli.command), None, None),
    };
    match outcome {
        Ok(r) => {
            report(&r);
            if r.success() {
                ExitCode::SUCCESS
            } else {
                ExitCode::from(2)
            }
        }
        Err(e) => {
            eprintln!("error: {e}");
            let record = e.record(experiment, hash.as_deref());
            if let Err(write_err) = write_json(&dir, "error.json", &record) {
                eprintln!("error: could not write error record: {write_err}");
            }
            ExitCode::from(1)
        }
    }
}
