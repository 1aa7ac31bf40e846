use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::HarnessError;

/// Assignment of rows to cross-validation folds.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FoldPlan {
    pub k: usize,
    /// Fold index of every row.
    pub assignments: Vec<usize>,
    pub seed: u64,
    pub stratified: bool,
    pub warnings: Vec<String>,
}

impl FoldPlan {
    /// (training rows, test rows) for one fold, each in ascending row order.
    pub fn split(&self, fold: usize) -> (Vec<usize>, Vec<usize>) {
        let mut train = Vec::with_capacity(self.assignments.len());
        let mut test = Vec::new();
        for (row, &f) in self.assignments.iter().enumerate() {
            if f == fold {
                test.push(row);
            } else {
                train.push(row);
            }
        }
        (train, test)
    }

    pub fn fold_sizes(&self) -> Vec<usize> {
        let mut sizes = vec![0; self.k];
        for &f in &self.assignments {
            sizes[f] += 1;
        }
        sizes
    }
}

/// Seeded stratified k-fold assignment.
///
/// Rows of each class are shuffled, the changed rows are listed before the
/// unchanged ones, and the list is dealt round-robin into folds. Fold sizes
/// therefore differ by at most one, and so do per-fold class counts.
pub fn make_folds(labels: &[u8], k: usize, seed: u64) -> Result<FoldPlan, HarnessError> {
    let n = labels.len();
    if k < 2 {
        return Err(HarnessError::BadFoldCount { k, n_rows: n });
    }
    if k > n {
        return Err(HarnessError::BadFoldCount { k, n_rows: n });
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut positives: Vec<usize> = (0..n).filter(|&i| labels[i] == 1).collect();
    let mut negatives: Vec<usize> = (0..n).filter(|&i| labels[i] != 1).collect();
    positives.shuffle(&mut rng);
    negatives.shuffle(&mut rng);

    let mut warnings = Vec::new();
    for (name, count) in [("changed", positives.len()), ("unchanged", negatives.len())] {
        if count < k {
            let msg = format!("only {count} {name} rows for {k} folds; some folds lack that class");
            log::warn!("{msg}");
            warnings.push(msg);
        }
    }

    let mut assignments = vec![0; n];
    for (pos, &row) in positives.iter().chain(&negatives).enumerate() {
        assignments[row] = pos % k;
    }
    Ok(FoldPlan {
        k,
        assignments,
        seed,
        stratified: true,
        warnings,
    })
}
