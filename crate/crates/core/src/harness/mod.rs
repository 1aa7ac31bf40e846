//! Cross-validation, the experiment grid, comparisons, and reports.

mod compare;
mod config;
mod folds;
mod grid;
mod metrics;
mod report;
mod selection;

pub use compare::{
    all_comparisons, compare, compare_classifiers, compare_feature_sets, method_table, methods, Axis, Comparison, Measure,
};
pub use config::{derive_seed, ExperimentConfig, FlatConfig};
pub use folds::{make_folds, FoldPlan};
pub use grid::{dataset_fingerprint, evaluate_cell, run_grid, EvalRecord, ExperimentGrid, FailedCell, FoldScore, GridOptions};
pub use metrics::Confusion;
pub use report::{
    emit_reports, load_results, summary_rows, unix_now, write_run_info, ResultsFile, RunInfo, RunMeta,
    RESULTS_FORMAT_VERSION, SUMMARY_HEADER,
};
pub use selection::{compute_selections, select_one, DatasetSelections};

use crate::dataset::DatasetError;
use crate::stats::StatsError;

#[derive(Debug, thiserror::Error)]
pub enum HarnessError {
    #[error("cannot make {k} folds from {n_rows} rows")]
    BadFoldCount { k: usize, n_rows: usize },
    #[error("fold plan covers {plan} rows but the dataset has {rows}")]
    FoldMismatch { plan: usize, rows: usize },
    #[error("no datasets given")]
    NoDatasets,
    #[error("dataset id `{0}` appears twice")]
    DuplicateDataset(String),
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("cannot access `{path}`: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("invalid JSON: {0}")]
    Json(#[from] serde_json::Error),
    #[error(transparent)]
    Dataset(#[from] DatasetError),
    #[error(transparent)]
    Stats(#[from] StatsError),
    #[error("cell failed: {0}")]
    Cell(String),
}
