//! Config-driven experiments with CSV artifacts and a pass/fail verdict.

mod config;
mod runner;
mod verdict;

pub use config::{
    EntropyConfig, ExperimentConfig, ExperimentKind, GaugeConfig, GirsanovConfig, GridConfig, InitialConfig, McConfig,
    ModelConfig, TimeConfig,
};
pub use runner::{artifacts, exit_code, run, run_path, written_artifacts};
pub use verdict::{Check, Verdict};
