//! Experiment harness: configuration, synthetic data, sweeps and reports.

pub mod config;
pub mod output;
pub mod report;
pub mod run;
pub mod svg;
pub mod synth;

pub use config::{DatasetSource, ExperimentConfig, GammaSetting, GroupAssignment};
pub use output::{aggregate, read_results, write_results, AggregateRow, Metadata, ResultRow};
pub use run::{prepare, run_experiment, run_sweep, run_training, train_models, SweepMode, SweepOutcome};
pub use synth::{generate_synthetic, SynthParams};
