use std::collections::{BTreeMap, HashSet};
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicU64, Ordering};

use nalgebra::DMatrix;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::config::{derive_seed, hex, ExperimentConfig};
use super::folds::{make_folds, FoldPlan};
use super::metrics::Confusion;
use super::selection::{compute_selections, select_one, DatasetSelections};
use super::HarnessError;
use crate::classifiers::{fit, ClassifierKind, TrainedModel};
use crate::dataset::MetricDataset;
use crate::ensembles::{ensemble_predict, fit_ensemble};
use crate::feature_set::{FeatureSet, FeatureSetLabel};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FoldScore {
    pub accuracy: f64,
    pub f_measure: f64,
    pub n_features: usize,
}

/// Cross-validated performance of one (dataset, feature set, classifier).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalRecord {
    pub dataset_id: String,
    pub feature_set: FeatureSetLabel,
    pub classifier: ClassifierKind,
    /// Percentage, from the confusion counts pooled over test folds.
    pub accuracy: f64,
    pub f_measure: f64,
    pub per_fold: Vec<FoldScore>,
    pub confusion: Confusion,
    pub flags: Vec<String>,
}

impl EvalRecord {
    fn from_folds(
        dataset_id: &str,
        feature_set: FeatureSetLabel,
        classifier: ClassifierKind,
        folds: Vec<(Confusion, usize, Vec<String>)>,
    ) -> Self {
        let mut confusion = Confusion::default();
        let mut flags = Vec::new();
        let mut per_fold = Vec::with_capacity(folds.len());
        for (k, (c, n_features, f)) in folds.into_iter().enumerate() {
            confusion += c;
            per_fold.push(FoldScore {
                accuracy: c.accuracy(),
                f_measure: c.f_measure(),
                n_features,
            });
            flags.extend(f.into_iter().map(|s| format!("fold {k}: {s}")));
        }
        flags.dedup();
        EvalRecord {
            dataset_id: dataset_id.to_string(),
            feature_set,
            classifier,
            accuracy: confusion.accuracy(),
            f_measure: confusion.f_measure(),
            per_fold,
            confusion,
            flags,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FailedCell {
    pub dataset_id: String,
    pub feature_set: FeatureSetLabel,
    pub classifier: ClassifierKind,
    pub error: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentGrid {
    pub datasets: Vec<String>,
    pub feature_sets: Vec<FeatureSetLabel>,
    pub classifiers: Vec<ClassifierKind>,
    /// Ordered by dataset, then feature set, then classifier.
    pub records: Vec<EvalRecord>,
    pub failures: Vec<FailedCell>,
    pub selections: Vec<DatasetSelections>,
}

impl ExperimentGrid {
    pub fn expected_cells(&self) -> usize {
        self.datasets.len() * self.feature_sets.len() * self.classifiers.len()
    }

    pub fn is_complete(&self) -> bool {
        self.failures.is_empty() && self.records.len() == self.expected_cells()
    }

    pub fn record(&self, dataset: &str, fs: FeatureSetLabel, kind: ClassifierKind) -> Option<&EvalRecord> {
        self.records
            .iter()
            .find(|r| r.dataset_id == dataset && r.feature_set == fs && r.classifier == kind)
    }

    pub fn has_duplicate_cells(&self) -> bool {
        let mut seen = HashSet::new();
        !self
            .records
            .iter()
            .all(|r| seen.insert((r.dataset_id.clone(), r.feature_set, r.classifier)))
    }
}

#[derive(Debug, Clone)]
pub struct GridOptions {
    pub seed: u64,
    pub config: ExperimentConfig,
    pub feature_sets: Vec<FeatureSetLabel>,
    pub classifiers: Vec<ClassifierKind>,
    /// Worker threads; `None` uses every core.
    pub jobs: Option<usize>,
    /// Directory of cached cells; `None` disables caching.
    pub cache_dir: Option<PathBuf>,
}

impl GridOptions {
    pub fn new(seed: u64) -> Self {
        Self {
            seed,
            config: ExperimentConfig::default(),
            feature_sets: FeatureSetLabel::ALL.to_vec(),
            classifiers: ClassifierKind::ALL.to_vec(),
            jobs: None,
            cache_dir: None,
        }
    }
}

/// Hex SHA-256 over a dataset's columns, values, and labels.
pub fn dataset_fingerprint(ds: &MetricDataset) -> String {
    let mut h = Sha256::new();
    for c in ds.columns() {
        h.update(c.as_str().as_bytes());
        h.update([0]);
    }
    for v in ds.data().iter() {
        h.update(v.to_bits().to_le_bytes());
    }
    h.update(ds.labels());
    hex(&h.finalize())
}

pub(crate) fn fold_plan(ds: &MetricDataset, cfg: &ExperimentConfig, seed: u64) -> Result<FoldPlan, HarnessError> {
    make_folds(ds.labels(), cfg.folds, derive_seed(seed, &["folds", ds.id()]))
}

fn model_seed(seed: u64, ds: &str, fs: FeatureSetLabel, kind: ClassifierKind, fold: usize) -> u64 {
    derive_seed(seed, &["model", ds, fs.as_str(), kind.as_str(), &fold.to_string()])
}

type FoldOutcome = Result<(Vec<u8>, Vec<String>), String>;

/// Fits and predicts every kind in `kinds` on one split. Base learners are
/// fitted once and reused by the ensembles.
fn run_split(
    x_train: &DMatrix<f64>,
    y_train: &[u8],
    x_test: &DMatrix<f64>,
    kinds: &[ClassifierKind],
    cfg: &ExperimentConfig,
    seed_of: &(dyn Fn(ClassifierKind) -> u64 + Sync),
) -> BTreeMap<ClassifierKind, FoldOutcome> {
    let any_ensemble = kinds.iter().any(|k| k.is_ensemble());
    let bases: Vec<ClassifierKind> = ClassifierKind::BASE
        .iter()
        .copied()
        .filter(|k| any_ensemble || kinds.contains(k))
        .collect();
    let fitted: Vec<(ClassifierKind, Result<TrainedModel, String>)> = bases
        .par_iter()
        .map(|&k| (k, fit(k, x_train, y_train, &cfg.classifier, seed_of(k)).map_err(|e| e.to_string())))
        .collect();
    let mut out = BTreeMap::new();
    for (k, model) in &fitted {
        if kinds.contains(k) {
            let outcome = match model {
                Ok(m) => m.predict(x_test).map(|p| (p, m.flags.clone())).map_err(|e| e.to_string()),
                Err(e) => Err(e.clone()),
            };
            out.insert(*k, outcome);
        }
    }
    let ok: Vec<TrainedModel> = fitted.iter().filter_map(|(_, m)| m.as_ref().ok().cloned()).collect();
    let missing = fitted.len() - ok.len();
    for &k in kinds.iter().filter(|k| k.is_ensemble()) {
        let outcome = fit_ensemble(k, x_train, y_train, ok.clone(), &cfg.forest, seed_of(k))
            .and_then(|m| ensemble_predict(&m, x_test))
            .map(|p| {
                let flags = if missing > 0 {
                    vec![format!("{missing} base learners failed and were left out")]
                } else {
                    Vec::new()
                };
                (p, flags)
            })
            .map_err(|e| e.to_string());
        out.insert(k, outcome);
    }
    out
}

/// How the feature set of each fold is obtained.
enum SetSource<'a> {
    Fixed(&'a FeatureSet),
    Nested(FeatureSetLabel),
}

impl SetSource<'_> {
    fn label(&self) -> FeatureSetLabel {
        match self {
            SetSource::Fixed(fs) => fs.label,
            SetSource::Nested(l) => *l,
        }
    }
}

/// Evaluates `kinds` for one (dataset, feature set) over every fold.
fn evaluate_block(
    ds: &MetricDataset,
    source: SetSource<'_>,
    kinds: &[ClassifierKind],
    plan: &FoldPlan,
    cfg: &ExperimentConfig,
    seed: u64,
) -> Vec<Result<EvalRecord, FailedCell>> {
    let label = source.label();
    let fail = |k: ClassifierKind, e: String| FailedCell {
        dataset_id: ds.id().to_string(),
        feature_set: label,
        classifier: k,
        error: e,
    };
    let mut per_kind: BTreeMap<ClassifierKind, Result<Vec<(Confusion, usize, Vec<String>)>, String>> =
        kinds.iter().map(|&k| (k, Ok(Vec::new()))).collect();
    for fold in 0..plan.k {
        let (train, test) = plan.split(fold);
        let split = (|| -> Result<_, String> {
            let train_ds = ds.subset_rows(&train).map_err(|e| e.to_string())?;
            let nested;
            let fs = match &source {
                SetSource::Fixed(fs) => *fs,
                SetSource::Nested(l) => {
                    let s = derive_seed(seed, &["nested", ds.id(), &fold.to_string()]);
                    nested = select_one(&train_ds, *l, cfg, s)
                        .map(|r| r.0)
                        .unwrap_or_else(|e| FeatureSet::fallback(*l, train_ds.columns(), format!("selector failed: {e}")));
                    &nested
                }
            };
            let x_train = train_ds.feature_matrix(&fs.members).map_err(|e| e.to_string())?;
            let x_test = ds
                .subset_rows(&test)
                .and_then(|t| t.feature_matrix(&fs.members))
                .map_err(|e| e.to_string())?;
            Ok((x_train, train_ds.labels().to_vec(), x_test, fs.members.len(), fs.fallback))
        })();
        let (x_train, y_train, x_test, n_features, fallback) = match split {
            Ok(s) => s,
            Err(e) => return kinds.iter().map(|&k| Err(fail(k, e.clone()))).collect(),
        };
        let truth: Vec<u8> = test.iter().map(|&r| ds.labels()[r]).collect();
        let pending: Vec<ClassifierKind> = per_kind.iter().filter(|(_, v)| v.is_ok()).map(|(k, _)| *k).collect();
        let seed_of = |k: ClassifierKind| model_seed(seed, ds.id(), label, k, fold);
        for (k, outcome) in run_split(&x_train, &y_train, &x_test, &pending, cfg, &seed_of) {
            let slot = per_kind.get_mut(&k).expect("pending kind");
            match outcome {
                Ok((pred, mut flags)) => {
                    if fallback {
                        flags.push("feature set fell back to all metrics".into());
                    }
                    if let Ok(v) = slot {
                        v.push((Confusion::from_predictions(&truth, &pred), n_features, flags));
                    }
                }
                Err(e) => *slot = Err(format!("fold {fold}: {e}")),
            }
        }
    }
    per_kind
        .into_iter()
        .map(|(k, v)| match v {
            Ok(folds) => Ok(EvalRecord::from_folds(ds.id(), label, k, folds)),
            Err(e) => Err(fail(k, e)),
        })
        .collect()
}

/// Cross-validates one classifier on one fixed feature set.
pub fn evaluate_cell(
    ds: &MetricDataset,
    feature_set: &FeatureSet,
    kind: ClassifierKind,
    folds: &FoldPlan,
    cfg: &ExperimentConfig,
    seed: u64,
) -> Result<EvalRecord, HarnessError> {
    if folds.assignments.len() != ds.n_rows() {
        return Err(HarnessError::FoldMismatch {
            plan: folds.assignments.len(),
            rows: ds.n_rows(),
        });
    }
    for m in &feature_set.members {
        if ds.column_index(*m).is_none() {
            return Err(HarnessError::Dataset(crate::dataset::DatasetError::MissingColumn(*m)));
        }
    }
    evaluate_block(ds, SetSource::Fixed(feature_set), &[kind], folds, cfg, seed)
        .pop()
        .expect("one cell")
        .map_err(|f| HarnessError::Cell(f.error))
}

#[derive(Debug, Serialize, Deserialize)]
struct CachedCell {
    key: String,
    record: EvalRecord,
}

struct CellCache {
    dir: PathBuf,
    base_key: String,
}

static TMP_COUNTER: AtomicU64 = AtomicU64::new(0);

impl CellCache {
    fn key(&self, ds: &str, fs: FeatureSetLabel, kind: ClassifierKind) -> String {
        format!("{}|{ds}|{}|{}", self.base_key, fs.as_str(), kind.as_str())
    }

    fn path(&self, key: &str) -> PathBuf {
        self.dir.join(format!("{}.json", hex(&Sha256::digest(key.as_bytes()))))
    }

    fn get(&self, key: &str) -> Option<EvalRecord> {
        let text = std::fs::read_to_string(self.path(key)).ok()?;
        let cell: CachedCell = serde_json::from_str(&text).ok()?;
        (cell.key == key).then_some(cell.record)
    }

    /// Writes through a unique temporary file and an atomic rename.
    fn put(&self, key: &str, record: &EvalRecord) -> Result<(), HarnessError> {
        let target = self.path(key);
        let tmp = self.dir.join(format!(
            ".{}.{}.{}.tmp",
            std::process::id(),
            TMP_COUNTER.fetch_add(1, Ordering::Relaxed),
            target.file_name().and_then(|s| s.to_str()).unwrap_or("cell")
        ));
        let json = serde_json::to_string(&CachedCell {
            key: key.to_string(),
            record: record.clone(),
        })?;
        let io = |e| HarnessError::Io {
            path: target.display().to_string(),
            source: e,
        };
        std::fs::write(&tmp, json).map_err(io)?;
        std::fs::rename(&tmp, &target).map_err(io)
    }
}

fn open_cache(dir: &Path, opts: &GridOptions) -> Result<CellCache, HarnessError> {
    std::fs::create_dir_all(dir).map_err(|e| HarnessError::Io {
        path: dir.display().to_string(),
        source: e,
    })?;
    Ok(CellCache {
        dir: dir.to_path_buf(),
        base_key: format!("v1|seed={}|config={}", opts.seed, opts.config.hash()),
    })
}

/// Runs every (dataset, feature set, classifier) cell.
///
/// Feature selection runs once per dataset and is shared by all
/// classifiers (inside each training fold with `nested`). Failed cells are
/// collected in `failures` and never abort the run.
pub fn run_grid(datasets: &[MetricDataset], opts: &GridOptions) -> Result<ExperimentGrid, HarnessError> {
    if datasets.is_empty() {
        return Err(HarnessError::NoDatasets);
    }
    let mut ids = HashSet::new();
    for ds in datasets {
        if !ids.insert(ds.id()) {
            return Err(HarnessError::DuplicateDataset(ds.id().to_string()));
        }
    }
    let mut pool = rayon::ThreadPoolBuilder::new();
    if let Some(j) = opts.jobs {
        pool = pool.num_threads(j.max(1));
    }
    let pool = pool.build().map_err(|e| HarnessError::Config(e.to_string()))?;
    let cache = opts.cache_dir.as_deref().map(|d| open_cache(d, opts)).transpose()?;
    pool.install(|| run_grid_inner(datasets, opts, cache.as_ref()))
}

fn run_grid_inner(datasets: &[MetricDataset], opts: &GridOptions, cache: Option<&CellCache>) -> Result<ExperimentGrid, HarnessError> {
    let cfg = &opts.config;
    let plans: Vec<FoldPlan> = datasets
        .iter()
        .map(|ds| fold_plan(ds, cfg, opts.seed))
        .collect::<Result<_, _>>()?;
    let selections: Vec<DatasetSelections> = datasets
        .par_iter()
        .map(|ds| compute_selections(ds, &opts.feature_sets, cfg, opts.seed))
        .collect();
    let fingerprints: Vec<String> = datasets.iter().map(dataset_fingerprint).collect();

    let blocks: Vec<(usize, usize)> = (0..datasets.len())
        .flat_map(|d| (0..opts.feature_sets.len()).map(move |f| (d, f)))
        .collect();
    let results: Vec<Vec<Result<EvalRecord, FailedCell>>> = blocks
        .par_iter()
        .map(|&(d, f)| {
            let ds = &datasets[d];
            let label = opts.feature_sets[f];
            let id = format!("{}#{}", ds.id(), fingerprints[d]);
            let mut cached: BTreeMap<ClassifierKind, EvalRecord> = BTreeMap::new();
            if let Some(c) = cache {
                for &k in &opts.classifiers {
                    if let Some(r) = c.get(&c.key(&id, label, k)) {
                        cached.insert(k, r);
                    }
                }
            }
            let missing: Vec<ClassifierKind> = opts.classifiers.iter().copied().filter(|k| !cached.contains_key(k)).collect();
            let source = if cfg.nested {
                SetSource::Nested(label)
            } else {
                SetSource::Fixed(&selections[d].sets[f])
            };
            let mut fresh = if missing.is_empty() {
                Vec::new()
            } else {
                evaluate_block(ds, source, &missing, &plans[d], cfg, opts.seed)
            };
            if let Some(c) = cache {
                for r in fresh.iter().flatten() {
                    if let Err(e) = c.put(&c.key(&id, label, r.classifier), r) {
                        log::warn!("cache write failed: {e}");
                    }
                }
            }
            let mut out: Vec<Result<EvalRecord, FailedCell>> = cached.into_values().map(Ok).collect();
            out.append(&mut fresh);
            let order = |r: &Result<EvalRecord, FailedCell>| {
                let k = match r {
                    Ok(r) => r.classifier,
                    Err(f) => f.classifier,
                };
                opts.classifiers.iter().position(|&c| c == k)
            };
            out.sort_by_key(order);
            out
        })
        .collect();

    let mut grid = ExperimentGrid {
        datasets: datasets.iter().map(|d| d.id().to_string()).collect(),
        feature_sets: opts.feature_sets.clone(),
        classifiers: opts.classifiers.clone(),
        records: Vec::new(),
        failures: Vec::new(),
        selections,
    };
    for r in results.into_iter().flatten() {
        match r {
            Ok(rec) => grid.records.push(rec),
            Err(f) => {
                log::warn!("cell {}/{}/{} failed: {}", f.dataset_id, f.feature_set, f.classifier, f.error);
                grid.failures.push(f);
            }
        }
    }
    Ok(grid)
}
