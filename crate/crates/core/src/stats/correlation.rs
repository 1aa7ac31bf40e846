use serde::{Deserialize, Serialize};

use super::StatsError;
use crate::dataset::{Metric, MetricDataset};

/// `|r|` at or above this is a strong linear relationship.
pub const STRONG_R: f64 = 0.7;
/// `|r|` at or above this (and below [`STRONG_R`]) is weak.
pub const WEAK_R: f64 = 0.3;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Strength {
    Strong,
    Weak,
    None,
}

impl Strength {
    pub fn of(r: f64) -> Self {
        let a = r.abs();
        if a >= STRONG_R {
            Strength::Strong
        } else if a >= WEAK_R {
            Strength::Weak
        } else {
            Strength::None
        }
    }
}

/// Sample Pearson correlation, or `None` if either input has zero variance.
pub fn pearson(x: &[f64], y: &[f64]) -> Option<f64> {
    debug_assert_eq!(x.len(), y.len());
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for (a, b) in x.iter().zip(y) {
        let dx = a - mx;
        let dy = b - my;
        sxy += dx * dy;
        sxx += dx * dx;
        syy += dy * dy;
    }
    if sxx == 0.0 || syy == 0.0 {
        return None;
    }
    Some((sxy / (sxx.sqrt() * syy.sqrt())).clamp(-1.0, 1.0))
}

/// Pairwise Pearson coefficients with strength bands.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorrelationMatrix {
    pub columns: Vec<Metric>,
    pub r: Vec<Vec<f64>>,
    pub strength: Vec<Vec<Strength>>,
    /// Columns with zero variance; their off-diagonal `r` is reported as 0.
    pub zero_variance: Vec<Metric>,
}

impl CorrelationMatrix {
    pub fn get(&self, a: Metric, b: Metric) -> Option<f64> {
        let i = self.columns.iter().position(|&m| m == a)?;
        let j = self.columns.iter().position(|&m| m == b)?;
        Some(self.r[i][j])
    }
}

pub fn pearson_matrix(ds: &MetricDataset, columns: &[Metric]) -> Result<CorrelationMatrix, StatsError> {
    if ds.n_rows() < 2 {
        return Err(StatsError::TooFewValues {
            needed: 2,
            got: ds.n_rows(),
        });
    }
    let cols: Vec<Vec<f64>> = columns
        .iter()
        .map(|&m| ds.column(m))
        .collect::<Result<_, _>>()?;
    Ok(correlation_of_columns(columns, &cols))
}

pub(crate) fn correlation_of_columns(columns: &[Metric], cols: &[Vec<f64>]) -> CorrelationMatrix {
    let k = columns.len();
    let mut r = vec![vec![0.0; k]; k];
    let mut zero_variance = Vec::new();
    for (i, c) in cols.iter().enumerate() {
        if c.iter().all(|&v| v == c[0]) {
            zero_variance.push(columns[i]);
        }
    }
    for i in 0..k {
        r[i][i] = 1.0;
        for j in (i + 1)..k {
            let v = pearson(&cols[i], &cols[j]).unwrap_or(0.0);
            r[i][j] = v;
            r[j][i] = v;
        }
    }
    let strength = r
        .iter()
        .map(|row| row.iter().map(|&v| Strength::of(v)).collect())
        .collect();
    CorrelationMatrix {
        columns: columns.to_vec(),
        r,
        strength,
        zero_variance,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exact_anti_relation() {
        let r = pearson(&[1., 2., 3.], &[6., 4., 2.]).unwrap();
        assert!((r + 1.0).abs() < 1e-15);
    }

    #[test]
    fn outlier_example_matches_direct_formula() {
        // Spreadsheet-style CORREL evaluation:
        // x̄ = 2.5, ȳ = 26.5; Σdxdy = 149, Σdx² = 5, Σdy² = 7205
        let expected = 149.0 / (5.0f64 * 7205.0).sqrt();
        let r = pearson(&[1., 2., 3., 4.], &[1., 2., 3., 100.]).unwrap();
        assert!((r - expected).abs() < 1e-15);
        assert!((r - 0.785_026_42).abs() < 1e-8);
    }

    #[test]
    fn zero_variance_is_none() {
        assert_eq!(pearson(&[1., 1., 1.], &[1., 2., 3.]), None);
    }

    #[test]
    fn strength_bands() {
        assert_eq!(Strength::of(0.7), Strength::Strong);
        assert_eq!(Strength::of(-1.0), Strength::Strong);
        assert_eq!(Strength::of(0.69999), Strength::Weak);
        assert_eq!(Strength::of(-0.3), Strength::Weak);
        assert_eq!(Strength::of(0.29), Strength::None);
    }
}
