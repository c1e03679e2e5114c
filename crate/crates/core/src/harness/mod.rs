//! Scenario configuration, the experiment runner and CSV artifacts.

mod output;
mod runner;
mod scenario;

pub use output::{compare, fmt_sig, read_summary, steady_state_psd, write_bundle, CompareTable};
pub use runner::{
    build_controller, mu_grid, prepare, run_algorithm, run_scenario, stability_sweep,
    steady_state_tail, tune_mu, AlgorithmSummary, Prepared, ScenarioResult, SweepPoint,
};
pub use scenario::{load_scenario, validate_config, Algorithm, NoiseSpec, Scenario, Seeds};
