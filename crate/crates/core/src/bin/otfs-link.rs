//! `otfs-link`: BER sweeps and channel inspection from the command line.
//!
//! Exit codes: 0 success, 1 configuration error, 2 runtime numerical error.

use clap::{Args, Parser, Subcommand};
use std::path::PathBuf;
use std::process::ExitCode;

use otfs_link::harness::{
    emit_csv, inspect_channel, run_sweep, write_csv, write_heatmap, EqualizerKind,
    ExperimentConfig, Preset,
};
use otfs_link::OtfsError;

#[derive(Parser)]
#[command(name = "otfs-link", version, about = "OTFS link-level BER simulator")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Source {
    /// JSON experiment config
    #[arg(long)]
    config: Option<PathBuf>,
    /// Built-in config used when --config is absent
    #[arg(long, value_parser = ["desk", "table2"], default_value = "desk")]
    preset: String,
}

impl Source {
    fn load(&self) -> Result<ExperimentConfig, OtfsError> {
        match &self.config {
            Some(path) => ExperimentConfig::load(path),
            None => Ok(ExperimentConfig::preset(self.preset.parse::<Preset>()?)),
        }
    }
}

#[derive(Subcommand)]
enum Command {
    /// Run a Monte-Carlo BER sweep and write CSV
    Run {
        #[command(flatten)]
        source: Source,
        /// Output CSV; stdout when absent
        #[arg(long)]
        out: Option<PathBuf>,
        /// Override base_seed
        #[arg(long)]
        seed: Option<u64>,
        /// Override n_trials
        #[arg(long)]
        trials: Option<usize>,
        /// Comma-separated equalizer list, e.g. otfs_fde,otfs_fde_dde
        #[arg(long, value_delimiter = ',')]
        equalizers: Option<Vec<String>>,
        /// Worker threads (default: all cores)
        #[arg(long)]
        threads: Option<usize>,
    },
    /// Write |H_eq| of one channel realization as a dense CSV grid
    InspectChannel {
        #[command(flatten)]
        source: Source,
        /// Maximum Doppler shift in Hz
        #[arg(long)]
        doppler: f64,
        #[arg(long)]
        out: PathBuf,
        /// Channel seed (default: the config's base_seed)
        #[arg(long)]
        seed: Option<u64>,
    },
}

fn run(cli: Cli) -> Result<(), OtfsError> {
    match cli.command {
        Command::Run {
            source,
            out,
            seed,
            trials,
            equalizers,
            threads,
        } => {
            let mut cfg = source.load()?;
            if let Some(s) = seed {
                cfg.base_seed = s;
            }
            if let Some(t) = trials {
                cfg.n_trials = t;
            }
            if let Some(list) = equalizers {
                cfg.equalizers = list
                    .iter()
                    .map(|s| s.parse::<EqualizerKind>())
                    .collect::<Result<_, _>>()?;
            }
            cfg.validate()?;
            let pool = rayon::ThreadPoolBuilder::new()
                .num_threads(threads.unwrap_or(0))
                .build()
                .map_err(|e| OtfsError::Config(e.to_string()))?;
            let records = pool.install(|| run_sweep(&cfg))?;
            match out {
                Some(path) => emit_csv(&records, &path)?,
                None => write_csv(&records, std::io::stdout().lock())?,
            }
        }
        Command::InspectChannel {
            source,
            doppler,
            out,
            seed,
        } => {
            let cfg = source.load()?;
            cfg.validate()?;
            let h_eq = inspect_channel(&cfg, doppler, seed.unwrap_or(cfg.base_seed))?;
            write_heatmap(&h_eq, &out)?;
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("otfs-link: {e}");
            ExitCode::from(if e.is_config_error() { 1 } else { 2 })
        }
    }
}
