use std::collections::BTreeSet;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::grid::{EvalRecord, ExperimentGrid};
use super::HarnessError;
use crate::stats::{pairwise_bonferroni, MethodScores, PairwiseTestReport, FAMILY_ALPHA};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Axis {
    Classifiers,
    FeatureSets,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Measure {
    Accuracy,
    FMeasure,
}

impl Axis {
    pub fn as_str(self) -> &'static str {
        match self {
            Axis::Classifiers => "classifiers",
            Axis::FeatureSets => "feature-sets",
        }
    }
}

impl Measure {
    pub const BOTH: [Measure; 2] = [Measure::Accuracy, Measure::FMeasure];

    pub fn as_str(self) -> &'static str {
        match self {
            Measure::Accuracy => "accuracy",
            Measure::FMeasure => "f_measure",
        }
    }

    pub fn of(self, r: &EvalRecord) -> f64 {
        match self {
            Measure::Accuracy => r.accuracy,
            Measure::FMeasure => r.f_measure,
        }
    }
}

impl fmt::Display for Axis {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Axis {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "classifiers" | "classifier" => Ok(Axis::Classifiers),
            "feature-sets" | "feature_sets" | "featuresets" => Ok(Axis::FeatureSets),
            _ => Err(format!("unknown axis `{s}` (expected classifiers or feature-sets)")),
        }
    }
}

/// Method name and observation key of a record along `axis`.
fn method_and_key(r: &EvalRecord, axis: Axis) -> (String, String) {
    match axis {
        Axis::Classifiers => (r.classifier.as_str().into(), format!("{}/{}", r.dataset_id, r.feature_set)),
        Axis::FeatureSets => (r.feature_set.as_str().into(), format!("{}/{}", r.dataset_id, r.classifier)),
    }
}

pub fn methods(grid: &ExperimentGrid, axis: Axis) -> Vec<String> {
    match axis {
        Axis::Classifiers => grid.classifiers.iter().map(|k| k.as_str().to_string()).collect(),
        Axis::FeatureSets => grid.feature_sets.iter().map(|l| l.as_str().to_string()).collect(),
    }
}

/// One score list per method, restricted to the observations every method
/// has. The flag tells whether anything was dropped.
pub fn method_table(grid: &ExperimentGrid, axis: Axis, measure: Measure) -> (Vec<MethodScores>, bool) {
    let names = methods(grid, axis);
    let mut tables: Vec<MethodScores> = names.iter().map(|m| MethodScores::new(m.clone(), [])).collect();
    for r in &grid.records {
        let (m, key) = method_and_key(r, axis);
        if let Some(t) = tables.iter_mut().find(|t| t.method == m) {
            t.scores.insert(key, measure.of(r));
        }
    }
    let all_keys: BTreeSet<String> = tables.iter().flat_map(|t| t.scores.keys().cloned()).collect();
    let common: BTreeSet<String> = all_keys
        .iter()
        .filter(|k| tables.iter().all(|t| t.scores.contains_key(*k)))
        .cloned()
        .collect();
    let incomplete = common.len() != all_keys.len() || !grid.failures.is_empty();
    for t in &mut tables {
        t.scores.retain(|k, _| common.contains(k));
    }
    (tables, incomplete)
}

pub fn compare(grid: &ExperimentGrid, axis: Axis, measure: Measure) -> Result<PairwiseTestReport, HarnessError> {
    let (table, incomplete) = method_table(grid, axis, measure);
    let mut report = pairwise_bonferroni(&table, FAMILY_ALPHA)?;
    report.incomplete = incomplete;
    Ok(report)
}

/// Pairwise tests among the classifiers; observations are
/// (dataset, feature set) pairs.
pub fn compare_classifiers(grid: &ExperimentGrid, measure: Measure) -> Result<PairwiseTestReport, HarnessError> {
    compare(grid, Axis::Classifiers, measure)
}

/// Pairwise tests among the feature sets; observations are
/// (dataset, classifier) pairs.
pub fn compare_feature_sets(grid: &ExperimentGrid, measure: Measure) -> Result<PairwiseTestReport, HarnessError> {
    compare(grid, Axis::FeatureSets, measure)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Comparison {
    pub axis: Axis,
    pub measure: Measure,
    pub report: Option<PairwiseTestReport>,
    pub error: Option<String>,
}

/// All four comparisons (two axes by two measures).
pub fn all_comparisons(grid: &ExperimentGrid) -> Vec<Comparison> {
    let mut out = Vec::new();
    for axis in [Axis::Classifiers, Axis::FeatureSets] {
        for measure in Measure::BOTH {
            let (report, error) = match compare(grid, axis, measure) {
                Ok(r) => (Some(r), None),
                Err(e) => (None, Some(e.to_string())),
            };
            out.push(Comparison {
                axis,
                measure,
                report,
                error,
            });
        }
    }
    out
}
