//! Config-driven experiment runner and comparison with published values.
//!
//! A run reads a [`RunConfig`], executes one [`Experiment`] and writes
//! plot-ready CSV/JSON plus a `manifest.json` (tool version, seed, config
//! hash, per-file SHA-256) into its own output directory. Outputs are
//! byte-identical for identical configs.

mod compare;
mod config;
mod run;

pub use compare::{
    compare_to_paper, fit_impurity, fit_losses, initial_value, measured_impurity, paper_comparison, reference_table, swapped_values,
    ComparisonReport, ComparisonRow, Context, LossFit, LossModel, ModelInfo, PaperComparison, Quantity, ReferenceValue, Requirement,
    SimulatedValue, SimulatedValues, SourceModel, Status, MEASURED_SETTINGS,
};
pub use config::{
    ChannelConfig, CompareConfig, Experiment, PostselectConfig, RunConfig, ScanConfig, SourceConfig, TeleportConfig, TomographyConfig,
};
pub use run::{exit_code, run, run_exit_code, FileRecord, Manifest, RunOutput};
