//! Experiment runner for `bleed-core`: TOML run configs, a rayon path
//! executor, and the `results.json` / `pnl_paths.csv` artifacts.

pub mod config;
pub mod exec;
pub mod output;
pub mod registry;
pub mod runner;

pub use config::{ConfigError, Experiment, RunConfig};
pub use exec::RayonExecutor;
pub use runner::{run_experiment, RunOutput};
