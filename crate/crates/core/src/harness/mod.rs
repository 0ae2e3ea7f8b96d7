//! Experiment files, canned sweeps and CSV/JSON reports.

mod config;
mod presets;
mod runner;

pub use config::{parse_config, parse_spec, parse_tm, ConfigPoint, ExperimentSpec, CONFIG_KEYS};
pub use presets::{preset, PRESETS};
pub use runner::{
    row_seed, run_experiment, Report, ReportRow, RowStatus, RunOptions, Workload, AUTO_MAX_WEIGHT, SEED_STRIDE,
};
