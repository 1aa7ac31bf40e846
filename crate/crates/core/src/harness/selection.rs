use serde::{Deserialize, Serialize};

use super::config::{derive_seed, ExperimentConfig};
use crate::dataset::{Metric, MetricDataset};
use crate::feature_set::{FeatureSet, FeatureSetLabel, SelectionError};
use crate::pfst::{run_pfst, PfstTrace};
use crate::ranking::{pca_select, rank, PcaLoadings, Ranker};
use crate::subset::{cfs_select, consistency_select, filtered_subset_select, genetic_select, rough_set_select, GaConfig};

/// The selected metric sets of one dataset plus the artifacts behind them.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetSelections {
    pub dataset_id: String,
    /// In the order requested.
    pub sets: Vec<FeatureSet>,
    pub pfst_trace: Option<PfstTrace>,
    pub pca: Option<PcaLoadings>,
}

impl DatasetSelections {
    pub fn get(&self, label: FeatureSetLabel) -> Option<&FeatureSet> {
        self.sets.iter().find(|s| s.label == label)
    }
}

fn canonical_columns(ds: &MetricDataset) -> Vec<Metric> {
    let mut c = ds.columns().to_vec();
    Metric::canonicalize(&mut c);
    c
}

/// Runs one selector; `seed` drives the stochastic ones.
pub fn select_one(
    ds: &MetricDataset,
    label: FeatureSetLabel,
    cfg: &ExperimentConfig,
    seed: u64,
) -> Result<(FeatureSet, Option<PfstTrace>, Option<PcaLoadings>), SelectionError> {
    let cols = canonical_columns(ds);
    let ranked = |r: Ranker| rank(ds, &cols, r).map(|r| (r.feature_set(), None, None));
    match label {
        FeatureSetLabel::Am => Ok((FeatureSet::all_metrics(&cols), None, None)),
        FeatureSetLabel::Fr1 => ranked(Ranker::ChiSquared),
        FeatureSetLabel::Fr2 => ranked(Ranker::GainRatio),
        FeatureSetLabel::Fr3 => ranked(Ranker::OneR),
        FeatureSetLabel::Fr4 => ranked(Ranker::InfoGain),
        FeatureSetLabel::Fr5 => pca_select(ds, &cols).map(|(fs, l)| (fs, None, Some(l))),
        FeatureSetLabel::Fs1 => cfs_select(ds).map(|r| (r.feature_set(), None, None)),
        FeatureSetLabel::Fs2 => consistency_select(ds).map(|r| (r.feature_set(), None, None)),
        FeatureSetLabel::Fs3 => filtered_subset_select(ds).map(|r| (r.feature_set(), None, None)),
        FeatureSetLabel::Fs4 => rough_set_select(ds).map(|r| (r.feature_set(), None, None)),
        FeatureSetLabel::Fs5 => {
            let ga = GaConfig {
                seed: derive_seed(seed, &["ga"]),
                ..cfg.ga.clone()
            };
            genetic_select(ds, &ga).map(|r| (r.feature_set(), None, None))
        }
        FeatureSetLabel::Pfst => {
            let mut pc = cfg.pfst.clone();
            pc.seed = derive_seed(seed, &["pfst"]);
            run_pfst(ds, &pc).map(|(fs, t)| (fs, Some(t), None))
        }
    }
}

/// Computes every requested set; a failing selector degrades to all
/// metrics with a warning instead of aborting.
pub fn compute_selections(ds: &MetricDataset, labels: &[FeatureSetLabel], cfg: &ExperimentConfig, seed: u64) -> DatasetSelections {
    let seed = derive_seed(seed, &["selection", ds.id()]);
    let cols = canonical_columns(ds);
    let mut out = DatasetSelections {
        dataset_id: ds.id().to_string(),
        sets: Vec::with_capacity(labels.len()),
        pfst_trace: None,
        pca: None,
    };
    for &label in labels {
        match select_one(ds, label, cfg, seed) {
            Ok((fs, trace, pca)) => {
                out.sets.push(fs);
                if trace.is_some() {
                    out.pfst_trace = trace;
                }
                if pca.is_some() {
                    out.pca = pca;
                }
            }
            Err(e) => {
                log::warn!("{}: {label} selection failed: {e}", ds.id());
                out.sets.push(FeatureSet::fallback(label, &cols, format!("selector failed: {e}")));
            }
        }
    }
    out
}
