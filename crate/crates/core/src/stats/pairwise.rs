use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::rank::signed_rank_test;
use super::StatsError;

/// Family-wise significance level before correction.
pub const FAMILY_ALPHA: f64 = 0.05;

/// One method's performance keyed by observation (e.g. `dataset/feature-set`).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MethodScores {
    pub method: String,
    pub scores: BTreeMap<String, f64>,
}

impl MethodScores {
    pub fn new(method: impl Into<String>, scores: impl IntoIterator<Item = (String, f64)>) -> Self {
        Self {
            method: method.into(),
            scores: scores.into_iter().collect(),
        }
    }
}

/// Pairwise signed-rank tests with a Bonferroni-adjusted cutoff.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PairwiseTestReport {
    pub methods: Vec<String>,
    pub n_observations: usize,
    /// `C(m, 2)`.
    pub n_pairs: usize,
    pub alpha: f64,
    /// `alpha / n_pairs`; a pair differs significantly when `p < cutoff`.
    pub cutoff: f64,
    /// Symmetric; diagonal is 1.
    pub p_values: Vec<Vec<f64>>,
    pub significant: Vec<Vec<bool>>,
    /// `mean(row method) - mean(column method)`; antisymmetric.
    pub mean_difference: Vec<Vec<f64>>,
    pub significant_pairs: usize,
    /// Set when the table was restricted to observations every method has.
    pub incomplete: bool,
}

/// Number of unordered pairs among `m` methods and the corrected cutoff.
pub fn bonferroni_cutoff(m: usize, alpha: f64) -> (usize, f64) {
    let pairs = m * m.saturating_sub(1) / 2;
    (pairs, alpha / pairs.max(1) as f64)
}

/// Compares every pair of methods on their paired observations.
///
/// Each pair gets a two-sided Wilcoxon signed-rank test on the
/// per-observation differences; the pair is significant when its p-value is
/// below `alpha / C(m, 2)`.
pub fn pairwise_bonferroni(table: &[MethodScores], alpha: f64) -> Result<PairwiseTestReport, StatsError> {
    let m = table.len();
    if m < 2 {
        return Err(StatsError::TooFewMethods(m));
    }
    let keys: Vec<&String> = table[0].scores.keys().collect();
    for ms in &table[1..] {
        if ms.scores.len() != keys.len() || !ms.scores.keys().zip(&keys).all(|(a, b)| a == *b) {
            return Err(StatsError::MismatchedObservations(ms.method.clone()));
        }
    }
    let values: Vec<Vec<f64>> = table
        .iter()
        .map(|ms| ms.scores.values().copied().collect())
        .collect();
    let means: Vec<f64> = values
        .iter()
        .map(|v| {
            if v.is_empty() {
                0.0
            } else {
                v.iter().sum::<f64>() / v.len() as f64
            }
        })
        .collect();

    let (n_pairs, cutoff) = bonferroni_cutoff(m, alpha);
    let mut p_values = vec![vec![1.0; m]; m];
    let mut significant = vec![vec![false; m]; m];
    let mut mean_difference = vec![vec![0.0; m]; m];
    let mut significant_pairs = 0;
    for i in 0..m {
        for j in (i + 1)..m {
            let diffs: Vec<f64> = values[i].iter().zip(&values[j]).map(|(a, b)| a - b).collect();
            let p = signed_rank_test(&diffs).p_value;
            let sig = p < cutoff;
            p_values[i][j] = p;
            p_values[j][i] = p;
            significant[i][j] = sig;
            significant[j][i] = sig;
            significant_pairs += usize::from(sig);
            let d = means[i] - means[j];
            mean_difference[i][j] = d;
            mean_difference[j][i] = -d;
        }
    }
    Ok(PairwiseTestReport {
        methods: table.iter().map(|ms| ms.method.clone()).collect(),
        n_observations: keys.len(),
        n_pairs,
        alpha,
        cutoff,
        p_values,
        significant,
        mean_difference,
        significant_pairs,
        incomplete: false,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn scores(method: &str, vals: &[f64]) -> MethodScores {
        MethodScores::new(
            method,
            vals.iter().enumerate().map(|(i, &v)| (format!("obs{i:03}"), v)),
        )
    }

    #[test]
    fn cutoffs_for_classifier_and_feature_set_families() {
        let (pairs, cutoff) = bonferroni_cutoff(21, FAMILY_ALPHA);
        assert_eq!(pairs, 210);
        assert_eq!(cutoff, 0.05 / 210.0);
        assert!((cutoff - 0.000_238_1).abs() < 1e-7);
        let (pairs, cutoff) = bonferroni_cutoff(12, FAMILY_ALPHA);
        assert_eq!(pairs, 66);
        assert!((cutoff - 0.000_757_5).abs() < 1e-7);
    }

    #[test]
    fn identical_vectors_are_not_different() {
        let v = [0.7, 0.8, 0.75, 0.9, 0.6];
        let r = pairwise_bonferroni(&[scores("a", &v), scores("b", &v)], FAMILY_ALPHA).unwrap();
        assert_eq!(r.p_values[0][1], 1.0);
        assert_eq!(r.mean_difference[0][1], 0.0);
        assert_eq!(r.significant_pairs, 0);
    }

    #[test]
    fn mean_difference_is_antisymmetric() {
        let r = pairwise_bonferroni(
            &[
                scores("a", &[1., 2., 3.]),
                scores("b", &[2., 2., 2.]),
                scores("c", &[0., 5., 1.]),
            ],
            FAMILY_ALPHA,
        )
        .unwrap();
        for i in 0..3 {
            assert_eq!(r.mean_difference[i][i], 0.0);
            for j in 0..3 {
                assert_eq!(r.mean_difference[i][j], -r.mean_difference[j][i]);
            }
        }
        assert!((r.mean_difference[2][1] - 0.0).abs() < 1e-12);
    }

    #[test]
    fn rejects_mismatched_keys_and_single_method() {
        let a = scores("a", &[1., 2.]);
        let mut b = scores("b", &[1., 2.]);
        b.scores.insert("extra".into(), 3.0);
        assert!(matches!(
            pairwise_bonferroni(&[a.clone(), b], FAMILY_ALPHA),
            Err(StatsError::MismatchedObservations(_))
        ));
        assert!(matches!(
            pairwise_bonferroni(&[a], FAMILY_ALPHA),
            Err(StatsError::TooFewMethods(1))
        ));
    }

    #[test]
    fn clear_separation_is_significant() {
        let a: Vec<f64> = (0..40).map(|i| 80.0 + (i % 7) as f64).collect();
        let b: Vec<f64> = a.iter().map(|v| v - 10.0 - 0.01 * v).collect();
        let r = pairwise_bonferroni(&[scores("a", &a), scores("b", &b)], FAMILY_ALPHA).unwrap();
        assert!(r.p_values[0][1] < r.cutoff);
        assert_eq!(r.significant_pairs, 1);
    }
}
