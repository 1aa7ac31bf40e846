//! Source-code-metric validation, feature selection, and classifier
//! comparison for change-proneness prediction.
//!
//! The guide in `book/` walks through each stage with runnable examples.

pub mod classifiers;
pub mod dataset;
pub mod ensembles;
pub mod feature_set;
pub mod harness;
mod linalg;
pub mod optim;
pub mod pfst;
pub mod ranking;
pub mod stats;
pub mod subset;

#[cfg(doctest)]
mod book {
    #[doc = include_str!("../../../book/src/introduction.md")]
    mod introduction {}
    #[doc = include_str!("../../../book/src/datasets.md")]
    mod datasets {}
    #[doc = include_str!("../../../book/src/statistics.md")]
    mod statistics {}
    #[doc = include_str!("../../../book/src/pfst.md")]
    mod pfst {}
    #[doc = include_str!("../../../book/src/selectors.md")]
    mod selectors {}
    #[doc = include_str!("../../../book/src/classifiers.md")]
    mod classifiers {}
    #[doc = include_str!("../../../book/src/ensembles.md")]
    mod ensembles {}
    #[doc = include_str!("../../../book/src/experiments.md")]
    mod experiments {}
    #[doc = include_str!("../../../book/src/configuration.md")]
    mod configuration {}
    #[doc = include_str!("../../../book/src/cli.md")]
    mod cli {}
}
