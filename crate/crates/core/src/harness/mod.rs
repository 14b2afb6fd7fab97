//! Synthetic experiments: data generation, parameter sweeps over `(K, c)`,
//! CSV output, log-log slope fits and a self-check suite.

mod config;
mod csv;
mod data;
mod fit;
mod oracles;
mod sweep;

pub use config::{ConfigError, ExperimentConfig, NoiseSetting, SweepMode};
pub use csv::{format_significant, write_csv, CSV_HEADER};
pub use data::gen_blr_data;
pub use fit::{fit_loglog_slope, LogLogFit};
pub use oracles::{run_oracles, OracleOptions, OracleOutcome};
pub use sweep::{noise_spec, run_sweep, tune_step_size, ResultRow, SweepOutput};
