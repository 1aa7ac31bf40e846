//! Report files written after a grid run.
//!
//! Every CSV starts with a `# config_hash=<hex> seed=<n>` comment line and
//! every JSON file carries `config_hash` and `seed` fields.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::compare::{method_table, methods, Axis, Comparison, Measure};
use super::config::ExperimentConfig;
use super::grid::ExperimentGrid;
use super::HarnessError;
use crate::stats::descriptive;

pub const RESULTS_FORMAT_VERSION: u32 = 1;

/// Column headers of the performance summary tables.
pub const SUMMARY_HEADER: [&str; 15] = [
    "method",
    "Accuracy Min",
    "Accuracy Max",
    "Accuracy Mean",
    "Accuracy Median",
    "Accuracy Std Dev",
    "Accuracy Q1",
    "Accuracy Q3",
    "F-Measure Min",
    "F-Measure Max",
    "F-Measure Mean",
    "F-Measure Median",
    "F-Measure Std Dev",
    "F-Measure Q1",
    "F-Measure Q3",
];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunMeta {
    pub config_hash: String,
    pub seed: u64,
    pub config: ExperimentConfig,
}

impl RunMeta {
    pub fn new(config: &ExperimentConfig, seed: u64) -> Self {
        Self {
            config_hash: config.hash(),
            seed,
            config: config.clone(),
        }
    }

    fn comment(&self) -> String {
        format!("# config_hash={} seed={}\n", self.config_hash, self.seed)
    }
}

/// Contents of `results.json`. Holds no wall-clock data, so identical runs
/// produce identical bytes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResultsFile {
    pub format_version: u32,
    pub config_hash: String,
    pub seed: u64,
    pub config: ExperimentConfig,
    pub grid: ExperimentGrid,
    pub comparisons: Vec<Comparison>,
}

pub fn load_results(path: impl AsRef<Path>) -> Result<ResultsFile, HarnessError> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|e| io_err(path, e))?;
    Ok(serde_json::from_str(&text)?)
}

fn io_err(path: &Path, e: std::io::Error) -> HarnessError {
    HarnessError::Io {
        path: path.display().to_string(),
        source: e,
    }
}

fn safe_name(id: &str) -> String {
    id.chars()
        .map(|c| if c.is_ascii_alphanumeric() || c == '-' || c == '_' { c } else { '_' })
        .collect()
}

struct Writer<'a> {
    dir: &'a Path,
    meta: &'a RunMeta,
    written: Vec<PathBuf>,
}

impl Writer<'_> {
    fn bytes(&mut self, name: &str, body: &[u8]) -> Result<(), HarnessError> {
        let path = self.dir.join(name);
        fs::write(&path, body).map_err(|e| io_err(&path, e))?;
        self.written.push(path);
        Ok(())
    }

    fn csv(&mut self, name: &str, extra_comment: Option<String>, rows: Vec<Vec<String>>) -> Result<(), HarnessError> {
        let mut buf = self.meta.comment().into_bytes();
        if let Some(c) = extra_comment {
            buf.extend_from_slice(format!("# {c}\n").as_bytes());
        }
        {
            let mut w = csv::WriterBuilder::new().flexible(true).from_writer(&mut buf);
            for r in rows {
                w.write_record(&r).map_err(|e| HarnessError::Config(e.to_string()))?;
            }
            w.flush().map_err(|e| io_err(&self.dir.join(name), e))?;
        }
        self.bytes(name, &buf)
    }

    fn json<T: Serialize>(&mut self, name: &str, value: &T) -> Result<(), HarnessError> {
        let mut body = serde_json::to_vec_pretty(value)?;
        body.push(b'\n');
        self.bytes(name, &body)
    }
}

/// Descriptive statistics of both measures for every method along `axis`.
pub fn summary_rows(grid: &ExperimentGrid, axis: Axis) -> Vec<Vec<String>> {
    let mut rows = vec![SUMMARY_HEADER.iter().map(|s| s.to_string()).collect::<Vec<_>>()];
    for m in methods(grid, axis) {
        let values = |measure: Measure| -> Vec<f64> {
            grid.records
                .iter()
                .filter(|r| match axis {
                    Axis::Classifiers => r.classifier.as_str() == m,
                    Axis::FeatureSets => r.feature_set.as_str() == m,
                })
                .map(|r| measure.of(r))
                .collect()
        };
        let (Ok(acc), Ok(f)) = (descriptive(&values(Measure::Accuracy)), descriptive(&values(Measure::FMeasure))) else {
            continue;
        };
        let mut row = vec![m.clone()];
        for d in [acc, f] {
            row.extend([d.min, d.max, d.mean, d.median, d.std_dev, d.q1, d.q3].iter().map(|v| v.to_string()));
        }
        rows.push(row);
    }
    rows
}

fn matrix_rows(methods: &[String], m: Option<&Vec<Vec<f64>>>) -> Vec<Vec<String>> {
    let mut rows = vec![std::iter::once("method".to_string()).chain(methods.iter().cloned()).collect()];
    if let Some(m) = m {
        for (name, row) in methods.iter().zip(m) {
            rows.push(std::iter::once(name.clone()).chain(row.iter().map(|v| v.to_string())).collect());
        }
    }
    rows
}

/// Writes every report into `out_dir` and returns the paths written.
pub fn emit_reports(
    grid: &ExperimentGrid,
    comparisons: &[Comparison],
    out_dir: impl AsRef<Path>,
    meta: &RunMeta,
) -> Result<Vec<PathBuf>, HarnessError> {
    let dir = out_dir.as_ref();
    fs::create_dir_all(dir).map_err(|e| io_err(dir, e))?;
    let mut w = Writer {
        dir,
        meta,
        written: Vec::new(),
    };

    w.csv("table_classifiers.csv", None, summary_rows(grid, Axis::Classifiers))?;
    w.csv("table_feature_sets.csv", None, summary_rows(grid, Axis::FeatureSets))?;

    for axis in [Axis::Classifiers, Axis::FeatureSets] {
        let names = methods(grid, axis);
        let tag = axis.as_str().replace('-', "_");
        for measure in Measure::BOTH {
            let comparison = comparisons.iter().find(|c| c.axis == axis && c.measure == measure);
            let report = comparison.and_then(|c| c.report.as_ref());
            let note = report.map(|r| {
                format!(
                    "pairs={} cutoff={} significant_pairs={} observations={} incomplete={}",
                    r.n_pairs, r.cutoff, r.significant_pairs, r.n_observations, r.incomplete
                )
            });
            let m = measure.as_str();
            w.csv(&format!("pvalues_{tag}_{m}.csv"), note.clone(), matrix_rows(&names, report.map(|r| &r.p_values)))?;
            w.csv(
                &format!("mean_difference_{tag}_{m}.csv"),
                note,
                matrix_rows(&names, report.map(|r| &r.mean_difference)),
            )?;
            let (table, _) = method_table(grid, axis, measure);
            let mut rows = vec![vec!["method".to_string(), "observation".to_string(), "value".to_string()]];
            for t in &table {
                for (k, v) in &t.scores {
                    rows.push(vec![t.method.clone(), k.clone(), v.to_string()]);
                }
            }
            w.csv(&format!("boxplot_{tag}_{m}.csv"), None, rows)?;
        }
    }

    #[derive(Serialize)]
    struct Tagged<'a, T> {
        config_hash: &'a str,
        seed: u64,
        dataset_id: &'a str,
        #[serde(flatten)]
        body: &'a T,
    }
    for sel in &grid.selections {
        let name = safe_name(&sel.dataset_id);
        if let Some(trace) = &sel.pfst_trace {
            w.json(
                &format!("pfst_trace_{name}.json"),
                &Tagged {
                    config_hash: &meta.config_hash,
                    seed: meta.seed,
                    dataset_id: &sel.dataset_id,
                    body: trace,
                },
            )?;
            let mut buf = meta.comment().into_bytes();
            trace.write_selection_grid(&mut buf).map_err(|e| io_err(dir, e))?;
            w.bytes(&format!("pfst_selection_{name}.csv"), &buf)?;
        }
        if let Some(pca) = &sel.pca {
            let mut buf = meta.comment().into_bytes();
            pca.write_csv(&mut buf).map_err(|e| io_err(dir, e))?;
            w.bytes(&format!("pca_loadings_{name}.csv"), &buf)?;
        }
    }

    let results = ResultsFile {
        format_version: RESULTS_FORMAT_VERSION,
        config_hash: meta.config_hash.clone(),
        seed: meta.seed,
        config: meta.config.clone(),
        grid: grid.clone(),
        comparisons: comparisons.to_vec(),
    };
    w.json("results.json", &results)?;
    Ok(w.written)
}

/// Run metadata that may differ between otherwise identical runs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunInfo {
    pub config_hash: String,
    pub seed: u64,
    pub started_unix: u64,
    pub finished_unix: u64,
    pub jobs: Option<usize>,
    pub cells: usize,
    pub failed_cells: usize,
    pub version: String,
}

pub fn write_run_info(out_dir: impl AsRef<Path>, info: &RunInfo) -> Result<PathBuf, HarnessError> {
    let path = out_dir.as_ref().join("run_info.json");
    let mut f = fs::File::create(&path).map_err(|e| io_err(&path, e))?;
    serde_json::to_writer_pretty(&mut f, info)?;
    f.write_all(b"\n").map_err(|e| io_err(&path, e))?;
    Ok(path)
}

pub fn unix_now() -> u64 {
    std::time::SystemTime::now()
        .duration_since(std::time::UNIX_EPOCH)
        .map_or(0, |d| d.as_secs())
}
