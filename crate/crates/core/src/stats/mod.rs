//! Statistical primitives: rank tests, univariate logistic regression,
//! Pearson correlation, confidence intervals, descriptive summaries, and
//! Bonferroni-corrected pairwise comparison.
//!
//! Every function here is a pure function of its inputs.

mod correlation;
mod describe;
mod logistic;
mod pairwise;
mod rank;

pub use correlation::{pearson, pearson_matrix, CorrelationMatrix, Strength, STRONG_R, WEAK_R};
pub(crate) use correlation::correlation_of_columns;
pub use describe::{descriptive, mean_ci, quantile_sorted, t_critical, DescriptiveStats, MeanCI};
pub use logistic::{fit_logistic, ulr_fit, LogisticFit, UlrResult, SEPARATION_RIDGE, ULR_ALPHA};
pub(crate) use logistic::sigmoid;
pub use pairwise::{bonferroni_cutoff, pairwise_bonferroni, MethodScores, PairwiseTestReport, FAMILY_ALPHA};
pub use rank::{
    midranks, rank_test, signed_rank_test, PValueMethod, RankTestResult, SignedRankResult, RANK_ALPHA,
    RANK_SUM_EXACT_BELOW, SIGNED_RANK_EXACT_MAX,
};

use crate::dataset::DatasetError;

#[derive(Debug, thiserror::Error)]
pub enum StatsError {
    #[error("empty group")]
    EmptyGroup,
    #[error("need at least {needed} values, got {got}")]
    TooFewValues { needed: usize, got: usize },
    #[error("length mismatch: {left} vs {right}")]
    LengthMismatch { left: usize, right: usize },
    #[error("single-class labels")]
    SingleClass,
    #[error("need at least 2 methods, got {0}")]
    TooFewMethods(usize),
    #[error("method `{0}` does not share the observation keys of the first method")]
    MismatchedObservations(String),
    #[error(transparent)]
    Dataset(#[from] DatasetError),
}
