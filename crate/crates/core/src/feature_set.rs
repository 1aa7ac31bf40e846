//! Named metric selections and the error type shared by every selector.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::dataset::{DatasetError, Metric};
use crate::stats::StatsError;

/// Which of the twelve metric sets a [`FeatureSet`] is.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum FeatureSetLabel {
    #[serde(rename = "AM")]
    Am,
    #[serde(rename = "FR1")]
    Fr1,
    #[serde(rename = "FR2")]
    Fr2,
    #[serde(rename = "FR3")]
    Fr3,
    #[serde(rename = "FR4")]
    Fr4,
    #[serde(rename = "FR5")]
    Fr5,
    #[serde(rename = "FS1")]
    Fs1,
    #[serde(rename = "FS2")]
    Fs2,
    #[serde(rename = "FS3")]
    Fs3,
    #[serde(rename = "FS4")]
    Fs4,
    #[serde(rename = "FS5")]
    Fs5,
    #[serde(rename = "PFST")]
    Pfst,
}

impl FeatureSetLabel {
    pub const ALL: [FeatureSetLabel; 12] = [
        FeatureSetLabel::Am,
        FeatureSetLabel::Fr1,
        FeatureSetLabel::Fr2,
        FeatureSetLabel::Fr3,
        FeatureSetLabel::Fr4,
        FeatureSetLabel::Fr5,
        FeatureSetLabel::Fs1,
        FeatureSetLabel::Fs2,
        FeatureSetLabel::Fs3,
        FeatureSetLabel::Fs4,
        FeatureSetLabel::Fs5,
        FeatureSetLabel::Pfst,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            FeatureSetLabel::Am => "AM",
            FeatureSetLabel::Fr1 => "FR1",
            FeatureSetLabel::Fr2 => "FR2",
            FeatureSetLabel::Fr3 => "FR3",
            FeatureSetLabel::Fr4 => "FR4",
            FeatureSetLabel::Fr5 => "FR5",
            FeatureSetLabel::Fs1 => "FS1",
            FeatureSetLabel::Fs2 => "FS2",
            FeatureSetLabel::Fs3 => "FS3",
            FeatureSetLabel::Fs4 => "FS4",
            FeatureSetLabel::Fs5 => "FS5",
            FeatureSetLabel::Pfst => "PFST",
        }
    }
}

impl fmt::Display for FeatureSetLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for FeatureSetLabel {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        FeatureSetLabel::ALL
            .iter()
            .copied()
            .find(|l| l.as_str().eq_ignore_ascii_case(s.trim()))
            .ok_or_else(|| format!("unknown feature set `{s}`"))
    }
}

/// A named selection of metric columns.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureSet {
    pub label: FeatureSetLabel,
    pub members: Vec<Metric>,
    /// For each member, the step that admitted it.
    pub provenance: Vec<String>,
    /// The selector found nothing usable and fell back to all metrics.
    pub fallback: bool,
    pub warnings: Vec<String>,
}

impl FeatureSet {
    pub fn new(label: FeatureSetLabel, members: Vec<Metric>, stage: &str) -> Self {
        let provenance = vec![stage.to_string(); members.len()];
        Self {
            label,
            members,
            provenance,
            fallback: false,
            warnings: Vec::new(),
        }
    }

    /// Every column of the dataset (the AM set).
    pub fn all_metrics(columns: &[Metric]) -> Self {
        Self::new(FeatureSetLabel::Am, columns.to_vec(), "all")
    }

    /// All columns under `label`, flagged as a fallback.
    pub fn fallback(label: FeatureSetLabel, columns: &[Metric], reason: impl Into<String>) -> Self {
        let reason = reason.into();
        log::warn!("{label}: {reason}; falling back to all metrics");
        Self {
            label,
            members: columns.to_vec(),
            provenance: vec!["fallback:AM".to_string(); columns.len()],
            fallback: true,
            warnings: vec![reason],
        }
    }

    pub fn len(&self) -> usize {
        self.members.len()
    }

    pub fn is_empty(&self) -> bool {
        self.members.is_empty()
    }
}

#[derive(Debug, thiserror::Error)]
pub enum SelectionError {
    #[error(transparent)]
    Dataset(#[from] DatasetError),
    #[error(transparent)]
    Stats(#[from] StatsError),
    #[error("need at least {needed} candidate metrics, got {got}")]
    TooFewCandidates { needed: usize, got: usize },
    #[error("need at least {needed} rows, got {got}")]
    TooFewRows { needed: usize, got: usize },
}
