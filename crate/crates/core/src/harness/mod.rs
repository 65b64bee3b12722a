//! Monte-Carlo BER experiments: configuration, seeded trials, sweeps and
//! CSV output.

mod config;
mod report;
mod runner;

pub use config::{EqualizerKind, ExperimentConfig, Preset};
pub use report::{emit_csv, parse_csv, read_csv, write_csv, write_heatmap, BerRecord, CSV_HEADER};
pub use runner::{inspect_channel, run_sweep, run_trial, trial_seed, SweepPoint, TrialOutcome};
