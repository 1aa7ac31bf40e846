use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

/// Per-feature z-scoring learned on training rows.
///
/// Constant columns keep a unit scale, so they map to all zeros.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Standardizer {
    pub means: Vec<f64>,
    /// Sample standard deviations (`n - 1` denominator).
    pub scales: Vec<f64>,
}

impl Standardizer {
    pub fn fit(x: &DMatrix<f64>) -> Self {
        let n = x.nrows() as f64;
        let mut means = Vec::with_capacity(x.ncols());
        let mut scales = Vec::with_capacity(x.ncols());
        for col in x.column_iter() {
            let mean = col.iter().sum::<f64>() / n.max(1.0);
            let var = if x.nrows() > 1 {
                col.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0)
            } else {
                0.0
            };
            let sd = var.sqrt();
            means.push(mean);
            scales.push(if sd > 1e-12 * mean.abs().max(1.0) { sd } else { 1.0 });
        }
        Self { means, scales }
    }

    pub fn n_features(&self) -> usize {
        self.means.len()
    }

    pub fn transform(&self, x: &DMatrix<f64>) -> DMatrix<f64> {
        let mut out = x.clone();
        for (j, mut col) in out.column_iter_mut().enumerate() {
            let (m, s) = (self.means[j], self.scales[j]);
            for v in col.iter_mut() {
                *v = (*v - m) / s;
            }
        }
        out
    }

    pub fn fit_transform(x: &DMatrix<f64>) -> (Self, DMatrix<f64>) {
        let s = Self::fit(x);
        let z = s.transform(x);
        (s, z)
    }
}
