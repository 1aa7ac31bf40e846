//! Metric datasets: the data model, CSV ingestion, and synthetic generators.
//!
//! A [`MetricDataset`] holds one row per class under study, one column per
//! [`Metric`], and a binary label where `1` means the class changed between
//! releases. Datasets are validated on construction and immutable afterwards.

mod metric;
mod synth;

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

pub use metric::{parse_metric_list, Metric, UnknownMetric};
pub use synth::{synthesize, two_rings, SynthSpec};

#[derive(Debug, thiserror::Error)]
pub enum DatasetError {
    #[error("cannot read `{path}`: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("malformed CSV: {0}")]
    Csv(String),
    #[error("missing header row")]
    MissingHeader,
    #[error("duplicate column `{0}`")]
    DuplicateColumn(String),
    #[error("unknown column `{0}` (not one of the 21 canonical metrics)")]
    UnknownColumn(String),
    #[error("label column `{0}` not found in header")]
    MissingLabelColumn(String),
    #[error("row {row}: non-numeric value `{value}` in column `{column}`")]
    NonNumeric {
        row: usize,
        column: String,
        value: String,
    },
    #[error("row {row}: non-finite value in column `{column}`")]
    NonFinite { row: usize, column: String },
    #[error("row {row}: label `{value}` is not one of 0/1/changed/unchanged")]
    BadLabel { row: usize, value: String },
    #[error("row {row}: expected {expected} fields, found {found}")]
    RaggedRow {
        row: usize,
        expected: usize,
        found: usize,
    },
    #[error("empty dataset")]
    Empty,
    #[error("single-class labels")]
    SingleClass,
    #[error("no metric columns")]
    NoColumns,
    #[error("shape mismatch: {0}")]
    Shape(String),
    #[error("informative and noise column sets overlap on {0}")]
    OverlappingColumns(Metric),
    #[error("synthetic datasets need at least 4 rows, got {0}")]
    TooFewRows(usize),
    #[error("separation must be finite and non-negative, got {0}")]
    BadSeparation(f64),
    #[error("column {0} is not present in dataset")]
    MissingColumn(Metric),
}

/// Per-class metric observations with binary change labels.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricDataset {
    id: String,
    name: String,
    columns: Vec<Metric>,
    data: DMatrix<f64>,
    labels: Vec<u8>,
}

impl MetricDataset {
    /// Builds a dataset, enforcing every invariant of the data model.
    pub fn new(
        id: impl Into<String>,
        name: impl Into<String>,
        columns: Vec<Metric>,
        data: DMatrix<f64>,
        labels: Vec<u8>,
    ) -> Result<Self, DatasetError> {
        if columns.is_empty() {
            return Err(DatasetError::NoColumns);
        }
        for (i, c) in columns.iter().enumerate() {
            if columns[..i].contains(c) {
                return Err(DatasetError::DuplicateColumn(c.to_string()));
            }
        }
        if data.ncols() != columns.len() {
            return Err(DatasetError::Shape(format!(
                "{} data columns for {} column names",
                data.ncols(),
                columns.len()
            )));
        }
        if data.nrows() != labels.len() {
            return Err(DatasetError::Shape(format!(
                "{} rows but {} labels",
                data.nrows(),
                labels.len()
            )));
        }
        if labels.is_empty() {
            return Err(DatasetError::Empty);
        }
        for (row, &l) in labels.iter().enumerate() {
            if l > 1 {
                return Err(DatasetError::BadLabel {
                    row: row + 1,
                    value: l.to_string(),
                });
            }
        }
        for (j, col) in data.column_iter().enumerate() {
            if let Some(row) = col.iter().position(|v| !v.is_finite()) {
                return Err(DatasetError::NonFinite {
                    row: row + 1,
                    column: columns[j].to_string(),
                });
            }
        }
        let positives = labels.iter().filter(|&&l| l == 1).count();
        if positives == 0 || positives == labels.len() {
            return Err(DatasetError::SingleClass);
        }
        Ok(Self {
            id: id.into(),
            name: name.into(),
            columns,
            data,
            labels,
        })
    }

    pub fn id(&self) -> &str {
        &self.id
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn columns(&self) -> &[Metric] {
        &self.columns
    }

    pub fn labels(&self) -> &[u8] {
        &self.labels
    }

    /// The `n_rows × n_metrics` observation matrix.
    pub fn data(&self) -> &DMatrix<f64> {
        &self.data
    }

    pub fn n_rows(&self) -> usize {
        self.labels.len()
    }

    pub fn n_columns(&self) -> usize {
        self.columns.len()
    }

    pub fn column_index(&self, metric: Metric) -> Option<usize> {
        self.columns.iter().position(|&m| m == metric)
    }

    /// Values of one metric column, in row order.
    pub fn column(&self, metric: Metric) -> Result<Vec<f64>, DatasetError> {
        let j = self
            .column_index(metric)
            .ok_or(DatasetError::MissingColumn(metric))?;
        Ok(self.data.column(j).iter().copied().collect())
    }

    /// Splits a column into (changed, unchanged) groups.
    pub fn split_by_label(&self, metric: Metric) -> Result<(Vec<f64>, Vec<f64>), DatasetError> {
        let values = self.column(metric)?;
        let mut changed = Vec::new();
        let mut unchanged = Vec::new();
        for (v, &l) in values.into_iter().zip(&self.labels) {
            if l == 1 {
                changed.push(v);
            } else {
                unchanged.push(v);
            }
        }
        Ok((changed, unchanged))
    }

    /// Dense `n_rows × metrics.len()` matrix of the requested columns.
    pub fn feature_matrix(&self, metrics: &[Metric]) -> Result<DMatrix<f64>, DatasetError> {
        let idx = metrics
            .iter()
            .map(|&m| self.column_index(m).ok_or(DatasetError::MissingColumn(m)))
            .collect::<Result<Vec<_>, _>>()?;
        Ok(self.data.select_columns(&idx))
    }

    /// Metrics whose column has zero variance.
    pub fn constant_columns(&self) -> Vec<Metric> {
        self.columns
            .iter()
            .zip(self.data.column_iter())
            .filter(|(_, col)| col.iter().all(|&v| v == col[0]))
            .map(|(&m, _)| m)
            .collect()
    }

    /// A new dataset restricted to the given rows (in the given order).
    pub fn subset_rows(&self, rows: &[usize]) -> Result<Self, DatasetError> {
        let data = self.data.select_rows(rows);
        let labels = rows.iter().map(|&r| self.labels[r]).collect();
        Self::new(
            self.id.clone(),
            self.name.clone(),
            self.columns.clone(),
            data,
            labels,
        )
    }

    /// A new dataset holding only the given columns.
    pub fn subset_columns(&self, metrics: &[Metric]) -> Result<Self, DatasetError> {
        let data = self.feature_matrix(metrics)?;
        Self::new(
            self.id.clone(),
            self.name.clone(),
            metrics.to_vec(),
            data,
            self.labels.clone(),
        )
    }

    pub fn with_identity(mut self, id: impl Into<String>, name: impl Into<String>) -> Self {
        self.id = id.into();
        self.name = name.into();
        self
    }
}

/// Class counts in the layout of the dataset-details table.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DatasetSummary {
    pub n_classes: usize,
    pub n_changed: usize,
    /// Percentage of changed classes, rounded half-up to two decimals.
    pub pct_changed: f64,
}

pub fn summarize(ds: &MetricDataset) -> DatasetSummary {
    summarize_labels(ds.labels())
}

pub(crate) fn summarize_labels(labels: &[u8]) -> DatasetSummary {
    let n = labels.len();
    let changed = labels.iter().filter(|&&l| l == 1).count();
    // Round half-up in integer hundredths so 1/3 -> 33.33 and 38/83 -> 45.78 exactly.
    let hundredths = if n == 0 {
        0
    } else {
        (20_000 * changed as u128 + n as u128) / (2 * n as u128)
    };
    DatasetSummary {
        n_classes: n,
        n_changed: changed,
        pct_changed: hundredths as f64 / 100.0,
    }
}

/// Options for [`load_csv`].
#[derive(Debug, Clone)]
pub struct LoadOptions {
    pub label_column: String,
    /// Skip (instead of rejecting) header columns that are not canonical metrics.
    pub permissive: bool,
}

impl LoadOptions {
    pub fn new(label_column: impl Into<String>) -> Self {
        Self {
            label_column: label_column.into(),
            permissive: false,
        }
    }

    pub fn permissive(mut self, yes: bool) -> Self {
        self.permissive = yes;
        self
    }
}

fn parse_label(raw: &str) -> Option<u8> {
    let t = raw.trim();
    if t.eq_ignore_ascii_case("changed") {
        return Some(1);
    }
    if t.eq_ignore_ascii_case("unchanged") {
        return Some(0);
    }
    match t.parse::<f64>() {
        Ok(v) if v == 0.0 => Some(0),
        Ok(v) if v == 1.0 => Some(1),
        _ => None,
    }
}

/// Loads a metric CSV. The dataset id and name default to the file stem.
pub fn load_csv(path: impl AsRef<Path>, opts: &LoadOptions) -> Result<MetricDataset, DatasetError> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|source| DatasetError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    let stem = path
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| "dataset".to_string());
    read_csv(file, opts, &stem)
}

/// Parses CSV text from any reader; see [`load_csv`].
pub fn read_csv<R: std::io::Read>(
    reader: R,
    opts: &LoadOptions,
    id: &str,
) -> Result<MetricDataset, DatasetError> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .trim(csv::Trim::All)
        .from_reader(reader);
    let mut records = rdr.records();
    let header = match records.next() {
        None => return Err(DatasetError::MissingHeader),
        Some(r) => r.map_err(|e| DatasetError::Csv(e.to_string()))?,
    };
    if header.iter().all(|h| h.is_empty()) {
        return Err(DatasetError::MissingHeader);
    }

    let mut label_idx = None;
    // (field position, metric)
    let mut metric_fields: Vec<(usize, Metric)> = Vec::new();
    let mut seen: Vec<&str> = Vec::new();
    for (pos, name) in header.iter().enumerate() {
        if seen.iter().any(|s| s.eq_ignore_ascii_case(name)) {
            return Err(DatasetError::DuplicateColumn(name.to_string()));
        }
        seen.push(name);
        if name == opts.label_column {
            label_idx = Some(pos);
            continue;
        }
        match name.parse::<Metric>() {
            Ok(m) => metric_fields.push((pos, m)),
            Err(_) if opts.permissive => {
                log::warn!("ignoring non-metric column `{name}`");
            }
            Err(_) => return Err(DatasetError::UnknownColumn(name.to_string())),
        }
    }
    let label_idx =
        label_idx.ok_or_else(|| DatasetError::MissingLabelColumn(opts.label_column.clone()))?;
    if metric_fields.is_empty() {
        return Err(DatasetError::NoColumns);
    }

    let width = header.len();
    let mut values: Vec<f64> = Vec::new();
    let mut labels = Vec::new();
    for (i, rec) in records.enumerate() {
        let row = i + 1;
        let rec = rec.map_err(|e| DatasetError::Csv(e.to_string()))?;
        if rec.len() == 1 && rec.get(0) == Some("") {
            continue;
        }
        if rec.len() != width {
            return Err(DatasetError::RaggedRow {
                row,
                expected: width,
                found: rec.len(),
            });
        }
        let raw_label = &rec[label_idx];
        let label = parse_label(raw_label).ok_or_else(|| DatasetError::BadLabel {
            row,
            value: raw_label.to_string(),
        })?;
        labels.push(label);
        for &(pos, m) in &metric_fields {
            let cell = &rec[pos];
            let v: f64 = cell.parse().map_err(|_| DatasetError::NonNumeric {
                row,
                column: m.to_string(),
                value: cell.to_string(),
            })?;
            if !v.is_finite() {
                return Err(DatasetError::NonFinite {
                    row,
                    column: m.to_string(),
                });
            }
            values.push(v);
        }
    }
    if labels.is_empty() {
        return Err(DatasetError::Empty);
    }
    let columns: Vec<Metric> = metric_fields.iter().map(|&(_, m)| m).collect();
    let data = DMatrix::from_row_slice(labels.len(), columns.len(), &values);
    let ds = MetricDataset::new(id, id, columns, data, labels)?;
    let constant = ds.constant_columns();
    if !constant.is_empty() {
        log::warn!("{}: zero-variance columns {:?}", ds.id(), constant);
    }
    Ok(ds)
}

/// Writes a dataset as CSV with the label column last.
///
/// Values use the shortest representation that parses back to the same
/// `f64`, so `load_csv(write_csv(ds))` reproduces `ds` exactly.
pub fn write_csv(
    ds: &MetricDataset,
    path: impl AsRef<Path>,
    label_column: &str,
) -> Result<(), DatasetError> {
    let path = path.as_ref();
    let io_err = |source| DatasetError::Io {
        path: path.to_path_buf(),
        source,
    };
    let file = File::create(path).map_err(io_err)?;
    let mut w = BufWriter::new(file);
    write_csv_to(ds, &mut w, label_column).map_err(io_err)?;
    w.flush().map_err(io_err)
}

pub fn write_csv_to<W: Write>(
    ds: &MetricDataset,
    w: &mut W,
    label_column: &str,
) -> std::io::Result<()> {
    let header: Vec<&str> = ds
        .columns
        .iter()
        .map(|m| m.as_str())
        .chain(std::iter::once(label_column))
        .collect();
    writeln!(w, "{}", header.join(","))?;
    for (i, label) in ds.labels.iter().enumerate() {
        for j in 0..ds.n_columns() {
            write!(w, "{},", ds.data[(i, j)])?;
        }
        writeln!(w, "{label}")?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn parse(text: &str) -> Result<MetricDataset, DatasetError> {
        read_csv(text.as_bytes(), &LoadOptions::new("changed"), "t")
    }

    #[test]
    fn summary_matches_dataset_table_rows() {
        let mut labels = vec![0u8; 83];
        labels[..38].fill(1);
        let s = summarize_labels(&labels);
        assert_eq!((s.n_classes, s.n_changed, s.pct_changed), (83, 38, 45.78));

        let mut labels = vec![0u8; 1943];
        labels[..1221].fill(1);
        let s = summarize_labels(&labels);
        assert_eq!((s.n_classes, s.n_changed, s.pct_changed), (1943, 1221, 62.84));
    }

    #[test]
    fn summary_rounding() {
        let s = summarize_labels(&[1, 0, 1, 0, 1, 0, 1, 0, 1, 0]);
        assert_eq!(s.pct_changed, 50.0);
        let s = summarize_labels(&[1, 0, 0]);
        assert_eq!(s.pct_changed, 33.33);
        // 1/8 = 12.5 exactly, 2/3 = 66.666.. -> 66.67
        let s = summarize_labels(&[1, 0, 0, 0, 0, 0, 0, 0]);
        assert_eq!(s.pct_changed, 12.5);
        let s = summarize_labels(&[1, 1, 0]);
        assert_eq!(s.pct_changed, 66.67);
    }

    #[test]
    fn loads_valid_csv() {
        let ds = parse("LOC,dit,changed\n10,1,1\n20,2,0\n30,1,changed\n").unwrap();
        assert_eq!(ds.columns(), &[Metric::Loc, Metric::Dit]);
        assert_eq!(ds.labels(), &[1, 0, 1]);
        assert_eq!(ds.column(Metric::Loc).unwrap(), vec![10.0, 20.0, 30.0]);
    }

    #[test]
    fn rejects_empty_dataset() {
        let err = parse("LOC,changed\n").unwrap_err();
        assert!(matches!(err, DatasetError::Empty));
        assert_eq!(err.to_string(), "empty dataset");
    }

    #[test]
    fn rejects_single_class() {
        let err = parse("LOC,changed\n1,0\n2,0\n").unwrap_err();
        assert_eq!(err.to_string(), "single-class labels");
    }

    #[test]
    fn rejects_missing_header() {
        assert!(matches!(parse(""), Err(DatasetError::MissingHeader)));
    }

    #[test]
    fn rejects_duplicate_header() {
        assert!(matches!(
            parse("LOC,loc,changed\n1,1,0\n"),
            Err(DatasetError::DuplicateColumn(_))
        ));
    }

    #[test]
    fn reports_non_numeric_cell_position() {
        let err = parse("LOC,CBO,changed\n1,2,0\n3,x,1\n").unwrap_err();
        match err {
            DatasetError::NonNumeric { row, column, value } => {
                assert_eq!((row, column.as_str(), value.as_str()), (2, "CBO", "x"));
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn rejects_non_finite() {
        assert!(matches!(
            parse("LOC,changed\nNaN,0\n1,1\n"),
            Err(DatasetError::NonFinite { row: 1, .. })
        ));
        assert!(matches!(
            parse("LOC,changed\n1,0\ninf,1\n"),
            Err(DatasetError::NonFinite { row: 2, .. })
        ));
    }

    #[test]
    fn unknown_columns_need_permissive_flag() {
        let text = "name,LOC,changed\nFoo,1,0\nBar,2,1\n";
        assert!(matches!(parse(text), Err(DatasetError::UnknownColumn(_))));
        let ds = read_csv(
            text.as_bytes(),
            &LoadOptions::new("changed").permissive(true),
            "t",
        )
        .unwrap();
        assert_eq!(ds.columns(), &[Metric::Loc]);
    }

    #[test]
    fn rejects_bad_label_and_missing_label_column() {
        assert!(matches!(
            parse("LOC,changed\n1,2\n2,1\n"),
            Err(DatasetError::BadLabel { row: 1, .. })
        ));
        assert!(matches!(
            parse("LOC,DIT\n1,0\n"),
            Err(DatasetError::MissingLabelColumn(_))
        ));
    }

    #[test]
    fn ragged_row_is_reported() {
        assert!(matches!(
            parse("LOC,CBO,changed\n1,2,0\n1,1\n"),
            Err(DatasetError::RaggedRow { row: 2, .. })
        ));
    }

    #[test]
    fn constant_columns_are_accepted_and_flagged() {
        let ds = parse("LOC,DIT,changed\n1,3,0\n2,3,1\n").unwrap();
        assert_eq!(ds.constant_columns(), vec![Metric::Dit]);
    }

    #[test]
    fn missing_file_is_an_io_error() {
        let err = load_csv("/nonexistent/x.csv", &LoadOptions::new("changed")).unwrap_err();
        assert!(matches!(err, DatasetError::Io { .. }));
    }
}
