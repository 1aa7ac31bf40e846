//! Feature ranking: χ², gain ratio, oneR, information gain, and PCA.
//!
//! The four filter rankers score each metric on its equal-frequency
//! discretization and keep the top `⌈log₂ n⌉` of `n` candidates. PCA keeps
//! every metric whose varimax-rotated loading exceeds 0.7 in magnitude on a
//! component with eigenvalue above 1.

use std::collections::BTreeMap;
use std::io::Write;

use nalgebra::{DMatrix, SymmetricEigen};
use serde::{Deserialize, Serialize};

use crate::dataset::{Metric, MetricDataset};
use crate::feature_set::{FeatureSet, FeatureSetLabel, SelectionError};
use crate::stats::correlation_of_columns;

/// Maximum number of bins per discretized metric.
pub const N_BINS: usize = 10;
/// Rotated loadings above this magnitude mark a metric as selected by PCA.
pub const LOADING_CUTOFF: f64 = 0.7;

/// `⌈log₂ n⌉`, at least 1.
pub fn top_k(n: usize) -> usize {
    let mut k = 0;
    while (1usize << k) < n {
        k += 1;
    }
    k.max(1)
}

/// Equal-frequency bin index of every value.
///
/// With `b = min(10, distinct values)` bins, a value whose first position
/// in sorted order is `r` goes to bin `⌊r·b/n⌋`. Ties therefore share a
/// bin and the result depends only on the ranks. Bin ids are renumbered
/// to `0..` in increasing value order.
pub fn discretize(values: &[f64]) -> Vec<usize> {
    let n = values.len();
    if n == 0 {
        return Vec::new();
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| values[a].total_cmp(&values[b]));
    let distinct = 1 + order.windows(2).filter(|w| values[w[0]] != values[w[1]]).count();
    let bins = distinct.min(N_BINS);
    let mut raw = vec![0; n];
    let mut first = 0;
    for pos in 0..n {
        if pos > 0 && values[order[pos]] != values[order[pos - 1]] {
            first = pos;
        }
        raw[order[pos]] = first * bins / n;
    }
    let mut ids = raw.clone();
    ids.sort_unstable();
    ids.dedup();
    raw.iter().map(|b| ids.binary_search(b).expect("present")).collect()
}

/// `counts[bin][label]`.
pub fn contingency(bins: &[usize], labels: &[u8]) -> Vec<[usize; 2]> {
    let n_bins = bins.iter().max().map_or(0, |m| m + 1);
    let mut t = vec![[0usize; 2]; n_bins];
    for (&b, &l) in bins.iter().zip(labels) {
        t[b][usize::from(l == 1)] += 1;
    }
    t
}

/// Pearson χ² statistic of a bins × label table.
pub fn chi_squared(table: &[[usize; 2]]) -> f64 {
    let n: usize = table.iter().map(|r| r[0] + r[1]).sum();
    if n == 0 {
        return 0.0;
    }
    let cols = [table.iter().map(|r| r[0]).sum::<usize>(), table.iter().map(|r| r[1]).sum::<usize>()];
    let mut chi = 0.0;
    for row in table {
        let rs = (row[0] + row[1]) as f64;
        for c in 0..2 {
            let e = rs * cols[c] as f64 / n as f64;
            if e > 0.0 {
                chi += (row[c] as f64 - e).powi(2) / e;
            }
        }
    }
    chi
}

/// Shannon entropy in bits of a count vector.
pub fn entropy(counts: &[usize]) -> f64 {
    let n: usize = counts.iter().sum();
    if n == 0 {
        return 0.0;
    }
    counts
        .iter()
        .filter(|&&c| c > 0)
        .map(|&c| {
            let p = c as f64 / n as f64;
            -p * p.log2()
        })
        .sum()
}

/// `H(label) − H(label | bin)` in bits.
pub fn information_gain(table: &[[usize; 2]]) -> f64 {
    let n: usize = table.iter().map(|r| r[0] + r[1]).sum();
    if n == 0 {
        return 0.0;
    }
    let h = entropy(&[table.iter().map(|r| r[0]).sum(), table.iter().map(|r| r[1]).sum()]);
    let cond: f64 = table
        .iter()
        .map(|r| (r[0] + r[1]) as f64 / n as f64 * entropy(r))
        .sum();
    (h - cond).max(0.0)
}

/// Information gain over split information; 0 when the split information is 0.
pub fn gain_ratio(table: &[[usize; 2]]) -> f64 {
    let split: Vec<usize> = table.iter().map(|r| r[0] + r[1]).collect();
    let si = entropy(&split);
    if si <= 0.0 {
        0.0
    } else {
        information_gain(table) / si
    }
}

/// Training accuracy (fraction) of predicting each bin's majority label.
pub fn one_r_accuracy(table: &[[usize; 2]]) -> f64 {
    let n: usize = table.iter().map(|r| r[0] + r[1]).sum();
    if n == 0 {
        return 0.0;
    }
    table.iter().map(|r| r[0].max(r[1])).sum::<usize>() as f64 / n as f64
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Ranker {
    ChiSquared,
    GainRatio,
    OneR,
    InfoGain,
}

impl Ranker {
    pub fn label(self) -> FeatureSetLabel {
        match self {
            Ranker::ChiSquared => FeatureSetLabel::Fr1,
            Ranker::GainRatio => FeatureSetLabel::Fr2,
            Ranker::OneR => FeatureSetLabel::Fr3,
            Ranker::InfoGain => FeatureSetLabel::Fr4,
        }
    }

    fn score(self, table: &[[usize; 2]]) -> f64 {
        match self {
            Ranker::ChiSquared => chi_squared(table),
            Ranker::GainRatio => gain_ratio(table),
            Ranker::OneR => one_r_accuracy(table),
            Ranker::InfoGain => information_gain(table),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RankedFeatures {
    pub ranker: Ranker,
    pub scores: BTreeMap<Metric, f64>,
    /// Descending score, canonical metric order on ties.
    pub order: Vec<Metric>,
    pub k: usize,
    /// Metrics whose score was defined as 0 (e.g. zero split information).
    pub flagged: Vec<Metric>,
}

impl RankedFeatures {
    pub fn selected(&self) -> &[Metric] {
        &self.order[..self.k.min(self.order.len())]
    }

    pub fn feature_set(&self) -> FeatureSet {
        FeatureSet::new(self.ranker.label(), self.selected().to_vec(), "rank")
    }
}

/// Scores every candidate with `ranker`.
pub fn rank(ds: &MetricDataset, candidates: &[Metric], ranker: Ranker) -> Result<RankedFeatures, SelectionError> {
    if candidates.is_empty() {
        return Err(SelectionError::TooFewCandidates { needed: 1, got: 0 });
    }
    let mut scores = BTreeMap::new();
    let mut flagged = Vec::new();
    for &m in candidates {
        let table = contingency(&discretize(&ds.column(m)?), ds.labels());
        if ranker == Ranker::GainRatio && table.len() < 2 {
            flagged.push(m);
        }
        scores.insert(m, ranker.score(&table));
    }
    let mut order: Vec<Metric> = scores.keys().copied().collect();
    order.sort_by(|a, b| scores[b].total_cmp(&scores[a]).then(a.cmp(b)));
    Ok(RankedFeatures {
        ranker,
        k: top_k(order.len()),
        scores,
        order,
        flagged,
    })
}

pub fn chi_squared_rank(ds: &MetricDataset, candidates: &[Metric]) -> Result<RankedFeatures, SelectionError> {
    rank(ds, candidates, Ranker::ChiSquared)
}

pub fn gain_ratio_rank(ds: &MetricDataset, candidates: &[Metric]) -> Result<RankedFeatures, SelectionError> {
    rank(ds, candidates, Ranker::GainRatio)
}

pub fn oner_rank(ds: &MetricDataset, candidates: &[Metric]) -> Result<RankedFeatures, SelectionError> {
    rank(ds, candidates, Ranker::OneR)
}

pub fn info_gain_rank(ds: &MetricDataset, candidates: &[Metric]) -> Result<RankedFeatures, SelectionError> {
    rank(ds, candidates, Ranker::InfoGain)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PcaLoadings {
    /// Metrics that entered the decomposition (zero-variance ones excluded).
    pub metrics: Vec<Metric>,
    /// Varimax-rotated loadings, metrics × retained components.
    pub components: DMatrix<f64>,
    /// All eigenvalues of the correlation matrix, non-increasing.
    pub eigenvalues: Vec<f64>,
    pub variance_pct: Vec<f64>,
    pub cumulative_pct: Vec<f64>,
    pub retained: usize,
    pub excluded: Vec<Metric>,
}

impl PcaLoadings {
    /// Loadings table with eigenvalue and variance footer rows.
    pub fn write_csv<W: Write>(&self, w: &mut W) -> std::io::Result<()> {
        let header: Vec<String> = (1..=self.retained).map(|c| format!("PC{c}")).collect();
        writeln!(w, "metric,{}", header.join(","))?;
        for (i, m) in self.metrics.iter().enumerate() {
            let row: Vec<String> = (0..self.retained)
                .map(|c| format!("{:.3}", self.components[(i, c)]))
                .collect();
            writeln!(w, "{m},{}", row.join(","))?;
        }
        for (name, values) in [
            ("Eigenvalues", &self.eigenvalues),
            ("% variance", &self.variance_pct),
            ("Cumulative % variance", &self.cumulative_pct),
        ] {
            let row: Vec<String> = values[..self.retained].iter().map(|v| format!("{v:.3}")).collect();
            writeln!(w, "{name},{}", row.join(","))?;
        }
        Ok(())
    }
}

/// Orthogonal varimax rotation with Kaiser row normalization.
pub fn varimax(loadings: &DMatrix<f64>) -> DMatrix<f64> {
    let (p, k) = loadings.shape();
    if k < 2 {
        return loadings.clone();
    }
    let h: Vec<f64> = loadings.row_iter().map(|r| r.norm()).collect();
    let mut a = loadings.clone();
    for i in 0..p {
        if h[i] > 0.0 {
            a.row_mut(i).scale_mut(1.0 / h[i]);
        }
    }
    let mut rot = DMatrix::<f64>::identity(k, k);
    let mut d_old = 0.0;
    for _ in 0..1000 {
        let l = &a * &rot;
        let col_sq: Vec<f64> = (0..k).map(|j| l.column(j).norm_squared()).collect();
        let target = DMatrix::from_fn(p, k, |i, j| l[(i, j)].powi(3) - l[(i, j)] * col_sq[j] / p as f64);
        let svd = (a.transpose() * target).svd(true, true);
        let (u, vt) = (svd.u.expect("u"), svd.v_t.expect("v_t"));
        rot = u * vt;
        let d: f64 = svd.singular_values.sum();
        if d_old > 0.0 && d < d_old * (1.0 + 1e-12) {
            break;
        }
        d_old = d;
    }
    let mut out = &a * rot;
    for i in 0..p {
        out.row_mut(i).scale_mut(h[i]);
    }
    out
}

/// Principal components of the correlation matrix with varimax rotation.
pub fn pca_loadings(ds: &MetricDataset, candidates: &[Metric]) -> Result<PcaLoadings, SelectionError> {
    if candidates.len() < 2 {
        return Err(SelectionError::TooFewCandidates {
            needed: 2,
            got: candidates.len(),
        });
    }
    if ds.n_rows() < 3 {
        return Err(SelectionError::TooFewRows {
            needed: 3,
            got: ds.n_rows(),
        });
    }
    let constant = ds.constant_columns();
    let (metrics, excluded): (Vec<Metric>, Vec<Metric>) = candidates.iter().partition(|m| !constant.contains(m));
    for m in &excluded {
        log::warn!("{}: {m} has zero variance; excluded from PCA", ds.id());
    }
    if metrics.len() < 2 {
        return Err(SelectionError::TooFewCandidates {
            needed: 2,
            got: metrics.len(),
        });
    }
    let cols: Vec<Vec<f64>> = metrics.iter().map(|&m| ds.column(m)).collect::<Result<_, _>>()?;
    let corr = correlation_of_columns(&metrics, &cols);
    let p = metrics.len();
    let r = DMatrix::from_fn(p, p, |i, j| corr.r[i][j]);
    let eig = SymmetricEigen::new(r);
    let mut idx: Vec<usize> = (0..p).collect();
    idx.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]).then(a.cmp(&b)));
    let eigenvalues: Vec<f64> = idx.iter().map(|&i| eig.eigenvalues[i].max(0.0)).collect();
    let total: f64 = eigenvalues.iter().sum();
    let variance_pct: Vec<f64> = eigenvalues.iter().map(|v| 100.0 * v / total).collect();
    let cumulative_pct: Vec<f64> = variance_pct
        .iter()
        .scan(0.0, |acc, v| {
            *acc += v;
            Some(*acc)
        })
        .collect();
    let retained = eigenvalues.iter().filter(|&&v| v > 1.0).count();
    let mut unrotated = DMatrix::zeros(p, retained);
    for (c, &i) in idx.iter().take(retained).enumerate() {
        let v = eig.eigenvectors.column(i);
        let scale = eigenvalues[c].sqrt();
        for row in 0..p {
            unrotated[(row, c)] = v[row] * scale;
        }
    }
    let mut components = varimax(&unrotated);
    for c in 0..retained {
        if components.column(c).sum() < 0.0 {
            components.column_mut(c).neg_mut();
        }
    }
    Ok(PcaLoadings {
        metrics,
        components,
        eigenvalues,
        variance_pct,
        cumulative_pct,
        retained,
        excluded,
    })
}

/// FR5: metrics loading above 0.7 on a retained rotated component.
pub fn pca_select(ds: &MetricDataset, candidates: &[Metric]) -> Result<(FeatureSet, PcaLoadings), SelectionError> {
    let pca = pca_loadings(ds, candidates)?;
    if pca.retained == 0 {
        let fs = FeatureSet::fallback(FeatureSetLabel::Fr5, candidates, "no component has eigenvalue above 1");
        return Ok((fs, pca));
    }
    let mut members = Vec::new();
    for (i, &m) in pca.metrics.iter().enumerate() {
        if (0..pca.retained).any(|c| pca.components[(i, c)].abs() > LOADING_CUTOFF) {
            members.push(m);
        }
    }
    let mut fs = if members.is_empty() {
        // strongest metric per component
        for c in 0..pca.retained {
            let best = (0..pca.metrics.len())
                .max_by(|&a, &b| {
                    pca.components[(a, c)]
                        .abs()
                        .total_cmp(&pca.components[(b, c)].abs())
                        .then(b.cmp(&a))
                })
                .expect("non-empty");
            members.push(pca.metrics[best]);
        }
        Metric::canonicalize(&mut members);
        let mut fs = FeatureSet::new(FeatureSetLabel::Fr5, members, "pca:top-loading");
        fs.warnings.push("no rotated loading above 0.7; kept the top loading per component".to_string());
        fs
    } else {
        Metric::canonicalize(&mut members);
        FeatureSet::new(FeatureSetLabel::Fr5, members, "pca")
    };
    for m in &pca.excluded {
        fs.warnings.push(format!("{m} has zero variance; excluded"));
    }
    Ok((fs, pca))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn k_values() {
        assert_eq!(top_k(21), 5);
        assert_eq!(top_k(16), 4);
        assert_eq!(top_k(17), 5);
        assert_eq!(top_k(2), 1);
        assert_eq!(top_k(1), 1);
    }

    #[test]
    fn chi_squared_examples() {
        assert_eq!(chi_squared(&[[10, 10], [10, 10]]), 0.0);
        assert_eq!(chi_squared(&[[10, 0], [0, 10]]), 20.0);
    }

    #[test]
    fn discretization_of_a_binary_feature() {
        let v: Vec<f64> = (0..20).map(|i| f64::from(u8::from(i >= 10))).collect();
        let b = discretize(&v);
        assert_eq!(b[..10], [0; 10]);
        assert_eq!(b[10..], [1; 10]);
    }

    #[test]
    fn discretization_uses_at_most_ten_bins() {
        let v: Vec<f64> = (0..100).map(f64::from).collect();
        let b = discretize(&v);
        assert_eq!(*b.iter().max().unwrap(), 9);
        assert_eq!(b.iter().filter(|&&x| x == 0).count(), 10);
    }

    #[test]
    fn entropy_based_examples() {
        // feature = label, balanced
        let t = [[10, 0], [0, 10]];
        assert!((information_gain(&t) - 1.0).abs() < 1e-12);
        assert!((gain_ratio(&t) - 1.0).abs() < 1e-12);
        assert_eq!(one_r_accuracy(&t), 1.0);
        // constant feature, 60/40
        let c = [[60, 40]];
        assert_eq!(information_gain(&c), 0.0);
        assert_eq!(gain_ratio(&c), 0.0);
        assert_eq!(one_r_accuracy(&c), 0.6);
    }

    #[test]
    fn one_r_sums_bin_majorities() {
        let t = [[8, 2], [4, 6], [1, 9]];
        assert!((one_r_accuracy(&t) - 23.0 / 30.0).abs() < 1e-15);
    }

    #[test]
    fn varimax_keeps_communalities() {
        let l = DMatrix::from_row_slice(4, 2, &[0.8, 0.3, 0.7, 0.4, 0.2, 0.9, 0.3, 0.8]);
        let r = varimax(&l);
        for i in 0..4 {
            assert!((l.row(i).norm_squared() - r.row(i).norm_squared()).abs() < 1e-12);
        }
    }
}
