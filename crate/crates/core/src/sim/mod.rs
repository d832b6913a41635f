//! Scenario configuration, presets and the Monte Carlo driver.

mod config;
pub mod output;
mod presets;
mod runner;
mod seed;

pub use config::{
    CodebookConfig, GridConfig, ScenarioConfig, SnrReference, SweepConfig, CONFIG_KEYS_HELP,
    SCHEMA_VERSION,
};
pub use presets::{preset, PRESETS, SWEEP_POWERS_DBM};
pub use runner::{
    median_gaps, run_experiment, sweep_tx_power, CellResult, DropOutcome, MedianGap,
    PrecoderFailure, PrecoderSummary, RuntimeInfo, SimulationResult, Simulator, SweepResult,
    SweepRow, REPORTED_PERCENTILES,
};
pub use seed::{drop_seed, splitmix64};

/// Version string recorded in artifacts. Builds may inject `git describe`
/// output through `MMSIM_GIT_DESCRIBE`.
pub fn version() -> &'static str {
    option_env!("MMSIM_GIT_DESCRIBE").unwrap_or(env!("CARGO_PKG_VERSION"))
}
