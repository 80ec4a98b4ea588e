//! End-to-end runs: load → filter → fold → train → candidates → re-rank →
//! evaluate, over a grid of variants and λ values.

mod config;
mod manifest;
mod report;
mod run;

pub use config::{load_dataset, DatasetFormat, ExperimentConfig};
pub use manifest::{DatasetCounts, FoldPartition, RunManifest, StageTiming};
pub use report::{aggregate, read_rows, write_rows, MetricRow, BASELINE_VARIANT, MEAN_FOLD};
pub use run::{run_experiment, run_experiment_with, run_to_dir, ExperimentOutput};
