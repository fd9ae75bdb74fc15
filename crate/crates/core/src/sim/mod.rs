//! Run configuration, the simulation driver and the experiment presets.

pub mod config;
pub mod driver;
pub mod mms;

pub use config::{ExperimentConfig, MeshConfig, OutputConfig, Preset, SimConfig};
pub use driver::{
    accumulation_slope, max_accumulation_dip, nuclear_cargo, nuclear_cargo_mass, run_nocodazole_experiment,
    run_oracle_comparison, run_simulation, NocodazoleReport, OracleReport, Problem, RunOutput,
};
pub use mms::{run_convergence_study, ConvergenceTable};
