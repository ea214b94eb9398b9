//! Configuration-driven experiment runner: the representation × clusterer ×
//! parameter × seed grid, the component-count ablation, and report output.

mod config;
mod report;
mod run;

use thiserror::Error;

pub use config::{ClustererSpec, DatasetSource, EliminationConfig, ExperimentConfig, ParamValue, SplitConfig};
pub use report::{best_rows, emit_report, read_records, write_pivot, BestRow, ReportFormat, ReportSummary};
pub use run::{
    ablation_config, prepare, run_ablation, run_grid, run_grid_with, run_single, slices, Ablation, GridOptions, GridOutcome,
    PivotRow, PreparedData, RunRecord, Slice, SliceKey,
};

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error("invalid config: {0}")]
    Config(String),
    #[error(transparent)]
    Toml(#[from] toml::de::Error),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Dataset(#[from] crate::dataset::DatasetError),
    #[error(transparent)]
    Preprocess(#[from] crate::preprocess::PreprocessError),
    #[error("worker pool: {0}")]
    Pool(#[from] rayon::ThreadPoolBuildError),
    #[error("no records to report")]
    EmptyReport,
}
