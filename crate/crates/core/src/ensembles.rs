//! Heterogeneous ensembles over the base classifiers.
//!
//! * **MVE** predicts "changed" when at least half of the base models do,
//!   so an even split goes to class 1.
//! * **BTE** hands every prediction to the base model with the highest
//!   training accuracy (earliest model on ties).
//! * **NDTF** is a random forest stacked on the base models' 0/1 outputs.
//!   Each tree sees a bootstrap sample of the training rows and
//!   `⌈√m⌉` of the `m` base-output columns.

use nalgebra::DMatrix;
use rand::seq::index::sample;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::classifiers::{ClassifierError, ClassifierKind, DecisionTree, TrainedModel, TreeConfig};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ForestConfig {
    pub n_trees: usize,
    /// `None` means `⌈√(number of base models)⌉`.
    pub columns_per_tree: Option<usize>,
    pub tree: TreeConfig,
}

impl Default for ForestConfig {
    fn default() -> Self {
        Self {
            n_trees: 50,
            columns_per_tree: None,
            tree: TreeConfig::default(),
        }
    }
}

/// Smallest `k` with `k² >= n`.
pub fn ceil_sqrt(n: usize) -> usize {
    let mut k = (n as f64).sqrt() as usize;
    while k * k < n {
        k += 1;
    }
    while k > 0 && (k - 1) * (k - 1) >= n {
        k -= 1;
    }
    k
}

/// Base predictions laid out as one column per model.
pub fn prediction_matrix(per_model: &[Vec<u8>]) -> DMatrix<f64> {
    let n = per_model.first().map_or(0, Vec::len);
    DMatrix::from_fn(n, per_model.len(), |i, j| f64::from(per_model[j][i]))
}

/// Majority vote, ties to 1.
pub fn majority_vote(per_model: &[Vec<u8>]) -> Vec<u8> {
    let n = per_model.first().map_or(0, Vec::len);
    (0..n)
        .map(|i| {
            let votes = per_model.iter().filter(|p| p[i] == 1).count();
            u8::from(2 * votes >= per_model.len())
        })
        .collect()
}

/// Index of the most accurate prediction vector, earliest on ties.
pub fn best_training_index(per_model: &[Vec<u8>], y: &[u8]) -> usize {
    let mut best = (0, 0);
    for (k, p) in per_model.iter().enumerate() {
        let correct = p.iter().zip(y).filter(|(a, b)| a == b).count();
        if k == 0 || correct > best.1 {
            best = (k, correct);
        }
    }
    best.0
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ForestTree {
    pub columns: Vec<usize>,
    pub tree: DecisionTree,
}

/// Random forest over base-model outputs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Forest {
    pub trees: Vec<ForestTree>,
}

impl Forest {
    pub fn fit(inputs: &DMatrix<f64>, y: &[u8], cfg: &ForestConfig, seed: u64) -> Self {
        let (n, m) = inputs.shape();
        let per_tree = cfg.columns_per_tree.unwrap_or_else(|| ceil_sqrt(m)).clamp(1, m.max(1));
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let trees = (0..cfg.n_trees)
            .map(|_| {
                let rows: Vec<usize> = (0..n).map(|_| rng.random_range(0..n)).collect();
                let mut columns = sample(&mut rng, m, per_tree).into_vec();
                columns.sort_unstable();
                let xs = inputs.select_rows(&rows).select_columns(&columns);
                let ys: Vec<u8> = rows.iter().map(|&r| y[r]).collect();
                ForestTree {
                    tree: DecisionTree::fit(&xs, &ys, &cfg.tree),
                    columns,
                }
            })
            .collect();
        Forest { trees }
    }

    /// Majority over tree votes, ties to 1.
    pub fn predict(&self, inputs: &DMatrix<f64>) -> Vec<u8> {
        (0..inputs.nrows())
            .map(|i| {
                let votes = self
                    .trees
                    .iter()
                    .filter(|t| {
                        let row: Vec<f64> = t.columns.iter().map(|&c| inputs[(i, c)]).collect();
                        t.tree.score_row(&row) >= 0.5
                    })
                    .count();
                u8::from(2 * votes >= self.trees.len())
            })
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum EnsembleMeta {
    None,
    Selected(usize),
    Forest(Forest),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnsembleModel {
    pub kind: ClassifierKind,
    pub base: Vec<TrainedModel>,
    pub meta: EnsembleMeta,
}

#[derive(Debug, thiserror::Error, PartialEq)]
pub enum EnsembleError {
    #[error("{0} is not an ensemble")]
    NotAnEnsemble(ClassifierKind),
    #[error("no base models")]
    NoBaseModels,
    #[error(transparent)]
    Classifier(#[from] ClassifierError),
}

fn base_predictions(base: &[TrainedModel], x: &DMatrix<f64>) -> Result<Vec<Vec<u8>>, ClassifierError> {
    base.iter().map(|m| m.predict(x)).collect()
}

/// Combines base models already fitted on `x_train`.
pub fn fit_ensemble(
    kind: ClassifierKind,
    x_train: &DMatrix<f64>,
    y_train: &[u8],
    base: Vec<TrainedModel>,
    cfg: &ForestConfig,
    seed: u64,
) -> Result<EnsembleModel, EnsembleError> {
    if !kind.is_ensemble() {
        return Err(EnsembleError::NotAnEnsemble(kind));
    }
    if base.is_empty() {
        return Err(EnsembleError::NoBaseModels);
    }
    let meta = match kind {
        ClassifierKind::Mve => EnsembleMeta::None,
        ClassifierKind::Bte => {
            let preds = base_predictions(&base, x_train)?;
            EnsembleMeta::Selected(best_training_index(&preds, y_train))
        }
        _ => {
            let preds = base_predictions(&base, x_train)?;
            EnsembleMeta::Forest(Forest::fit(&prediction_matrix(&preds), y_train, cfg, seed))
        }
    };
    Ok(EnsembleModel { kind, base, meta })
}

pub fn ensemble_predict(model: &EnsembleModel, x: &DMatrix<f64>) -> Result<Vec<u8>, EnsembleError> {
    Ok(match &model.meta {
        EnsembleMeta::Selected(k) => model.base[*k].predict(x)?,
        EnsembleMeta::None => majority_vote(&base_predictions(&model.base, x)?),
        EnsembleMeta::Forest(f) => f.predict(&prediction_matrix(&base_predictions(&model.base, x)?)),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ceil_sqrt_values() {
        assert_eq!(ceil_sqrt(18), 5);
        assert_eq!(ceil_sqrt(16), 4);
        assert_eq!(ceil_sqrt(17), 5);
        assert_eq!(ceil_sqrt(1), 1);
        assert_eq!(ceil_sqrt(0), 0);
    }

    #[test]
    fn votes() {
        let ten_eight: Vec<Vec<u8>> = (0..18).map(|k| vec![u8::from(k < 10)]).collect();
        assert_eq!(majority_vote(&ten_eight), vec![1]);
        let eight_ten: Vec<Vec<u8>> = (0..18).map(|k| vec![u8::from(k < 8)]).collect();
        assert_eq!(majority_vote(&eight_ten), vec![0]);
        let tie: Vec<Vec<u8>> = (0..18).map(|k| vec![u8::from(k < 9)]).collect();
        assert_eq!(majority_vote(&tie), vec![1]);
    }

    #[test]
    fn best_training_picks_argmax() {
        let y = vec![1, 0, 1, 0, 1, 0, 1, 0, 1, 0];
        let mut preds = Vec::new();
        for correct in [7, 9, 8, 9] {
            preds.push(y.iter().enumerate().map(|(i, &v)| if i < correct { v } else { 1 - v }).collect());
        }
        assert_eq!(best_training_index(&preds, &y), 1);
    }

    #[test]
    fn identical_trees_agree_with_their_tree() {
        let inputs = DMatrix::from_row_slice(6, 1, &[0.0, 0.0, 0.0, 1.0, 1.0, 1.0]);
        let tree = DecisionTree::fit(&inputs, &[0, 0, 0, 1, 1, 1], &TreeConfig::default());
        let f = Forest {
            trees: vec![
                ForestTree {
                    columns: vec![0],
                    tree,
                };
                5
            ],
        };
        let probe = DMatrix::from_row_slice(2, 1, &[1.0, 0.0]);
        assert_eq!(f.predict(&probe), vec![1, 0]);
    }
}
