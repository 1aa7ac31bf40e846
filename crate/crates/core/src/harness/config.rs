//! Pipeline configuration and its flat file form.
//!
//! The file is flat TOML: one `key = value` per line, no tables. Every key
//! is optional and unknown keys are rejected.
//!
//! ```toml
//! seed = 7
//! folds = 5
//! svm_c = 2.0
//! nn_max_epochs = 300
//! ```

use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::HarnessError;
use crate::classifiers::ClassifierConfig;
use crate::ensembles::ForestConfig;
use crate::pfst::PfstConfig;
use crate::subset::GaConfig;

/// Every hyperparameter of a run except the seed.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub folds: usize,
    /// Re-run feature selection inside each training fold.
    pub nested: bool,
    pub pfst: PfstConfig,
    pub ga: GaConfig,
    pub forest: ForestConfig,
    pub classifier: ClassifierConfig,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            folds: 5,
            nested: false,
            pfst: PfstConfig::default(),
            ga: GaConfig::default(),
            forest: ForestConfig::default(),
            classifier: ClassifierConfig::default(),
        }
    }
}

impl ExperimentConfig {
    /// Hex SHA-256 of the canonical JSON form.
    pub fn hash(&self) -> String {
        let json = serde_json::to_string(self).expect("config serializes");
        hex(&Sha256::digest(json.as_bytes()))
    }
}

pub(crate) fn hex(bytes: &[u8]) -> String {
    bytes.iter().map(|b| format!("{b:02x}")).collect()
}

/// Mixes a base seed with string identifiers into an independent seed.
pub fn derive_seed(seed: u64, parts: &[&str]) -> u64 {
    let mut h = Sha256::new();
    h.update(seed.to_le_bytes());
    for p in parts {
        h.update((p.len() as u64).to_le_bytes());
        h.update(p.as_bytes());
    }
    let d = h.finalize();
    u64::from_le_bytes(d[..8].try_into().expect("8 bytes"))
}

/// The flat file schema.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FlatConfig {
    pub seed: Option<u64>,
    pub folds: Option<usize>,
    pub nested: Option<bool>,

    pub pfst_rank_alpha: Option<f64>,
    pub pfst_ulr_alpha: Option<f64>,
    pub pfst_correlation_threshold: Option<f64>,
    pub pfst_p_enter: Option<f64>,
    pub pfst_cv_folds: Option<usize>,

    pub ga_population: Option<usize>,
    pub ga_generations: Option<usize>,
    pub ga_crossover_rate: Option<f64>,
    pub ga_mutation_rate: Option<f64>,
    pub ga_elitism: Option<usize>,
    pub ga_tournament: Option<usize>,

    pub forest_trees: Option<usize>,
    pub forest_columns_per_tree: Option<usize>,

    pub tree_max_depth: Option<usize>,
    pub tree_min_leaf: Option<usize>,
    pub polyr_ridge: Option<f64>,
    pub logr_ridge: Option<f64>,
    pub svm_c: Option<f64>,
    pub svm_tolerance: Option<f64>,
    pub svm_max_iter: Option<usize>,
    pub lssvm_gamma: Option<f64>,
    pub poly_degree: Option<u32>,
    pub poly_coef0: Option<f64>,
    pub kernel_gamma: Option<f64>,
    pub elm_hidden: Option<usize>,

    pub nn_hidden_units: Option<usize>,
    pub nn_max_epochs: Option<usize>,
    pub nn_learning_rate: Option<f64>,
    pub nn_momentum: Option<f64>,
    pub nn_lr_adapt_up: Option<f64>,
    pub nn_lr_adapt_down: Option<f64>,
    pub nn_lm_lambda0: Option<f64>,
    pub nn_tolerance: Option<f64>,
}

macro_rules! set {
    ($src:expr => $dst:expr) => {
        if let Some(v) = $src {
            $dst = v;
        }
    };
    ($src:expr => some $dst:expr) => {
        if let Some(v) = $src {
            $dst = Some(v);
        }
    };
}

impl FlatConfig {
    pub fn parse(text: &str) -> Result<Self, HarnessError> {
        toml::from_str(text).map_err(|e| HarnessError::Config(e.to_string()))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, HarnessError> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| HarnessError::Io {
            path: path.display().to_string(),
            source: e,
        })?;
        Self::parse(&text)
    }

    /// Overlays the keys present in the file on `base`.
    pub fn apply(&self, base: &ExperimentConfig) -> ExperimentConfig {
        let mut c = base.clone();
        set!(self.folds => c.folds);
        set!(self.nested => c.nested);

        set!(self.pfst_rank_alpha => c.pfst.rank_alpha);
        set!(self.pfst_ulr_alpha => c.pfst.ulr_alpha);
        set!(self.pfst_correlation_threshold => c.pfst.correlation_threshold);
        set!(self.pfst_p_enter => c.pfst.p_enter);
        set!(self.pfst_cv_folds => c.pfst.cv_folds);

        set!(self.ga_population => c.ga.population);
        set!(self.ga_generations => c.ga.generations);
        set!(self.ga_crossover_rate => c.ga.crossover_rate);
        set!(self.ga_mutation_rate => some c.ga.mutation_rate);
        set!(self.ga_elitism => c.ga.elitism);
        set!(self.ga_tournament => c.ga.tournament);

        set!(self.forest_trees => c.forest.n_trees);
        set!(self.forest_columns_per_tree => some c.forest.columns_per_tree);

        let k = &mut c.classifier;
        set!(self.tree_max_depth => k.tree.max_depth);
        set!(self.tree_min_leaf => k.tree.min_leaf);
        c.forest.tree = k.tree.clone();
        set!(self.polyr_ridge => k.polyr_ridge);
        set!(self.logr_ridge => k.logr_ridge);
        set!(self.svm_c => k.svm_c);
        set!(self.svm_tolerance => k.svm_tolerance);
        set!(self.svm_max_iter => k.svm_max_iter);
        set!(self.lssvm_gamma => k.lssvm_gamma);
        set!(self.poly_degree => k.poly_degree);
        set!(self.poly_coef0 => k.poly_coef0);
        set!(self.kernel_gamma => some k.kernel_gamma);
        set!(self.elm_hidden => some k.elm_hidden);

        set!(self.nn_hidden_units => some k.nn.hidden_units);
        set!(self.nn_max_epochs => k.nn.max_epochs);
        set!(self.nn_learning_rate => k.nn.learning_rate);
        set!(self.nn_momentum => k.nn.momentum);
        set!(self.nn_lr_adapt_up => k.nn.lr_adapt_up);
        set!(self.nn_lr_adapt_down => k.nn.lr_adapt_down);
        set!(self.nn_lm_lambda0 => k.nn.lm_lambda0);
        set!(self.nn_tolerance => k.nn.tolerance);
        c
    }
}
