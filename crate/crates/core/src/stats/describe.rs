use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, StudentsT};

use super::StatsError;

/// A 95% confidence interval for a mean.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MeanCI {
    pub mean: f64,
    pub lo: f64,
    pub hi: f64,
    pub level: f64,
}

impl MeanCI {
    pub fn overlaps(&self, other: &MeanCI) -> bool {
        self.lo <= other.hi && other.lo <= self.hi
    }
}

/// Two-sided Student-t critical value `t(1 - alpha/2, df)`.
pub fn t_critical(level: f64, df: f64) -> f64 {
    // df >= 1 is guaranteed by the callers
    let t = StudentsT::new(0.0, 1.0, df).expect("positive degrees of freedom");
    t.inverse_cdf(0.5 + level / 2.0)
}

/// `mean ± t(0.975, n-1) · s/√n`.
pub fn mean_ci(values: &[f64]) -> Result<MeanCI, StatsError> {
    let n = values.len();
    if n < 2 {
        return Err(StatsError::TooFewValues { needed: 2, got: n });
    }
    let nf = n as f64;
    let mean = values.iter().sum::<f64>() / nf;
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (nf - 1.0);
    let half = if var == 0.0 {
        0.0
    } else {
        t_critical(0.95, nf - 1.0) * (var / nf).sqrt()
    };
    Ok(MeanCI {
        mean,
        lo: mean - half,
        hi: mean + half,
        level: 0.95,
    })
}

/// Box-plot style summary used by the performance tables.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DescriptiveStats {
    pub min: f64,
    pub max: f64,
    pub mean: f64,
    pub median: f64,
    /// Sample standard deviation (`n - 1` denominator); 0 for one value.
    pub std_dev: f64,
    pub q1: f64,
    pub q3: f64,
}

/// Quantile by linear interpolation between order statistics.
///
/// For sorted `x[0..n]` and `h = (n - 1)·q`, returns
/// `x[⌊h⌋] + (h - ⌊h⌋)·(x[⌊h⌋+1] - x[⌊h⌋])` (the "inclusive" method).
pub fn quantile_sorted(sorted: &[f64], q: f64) -> f64 {
    let h = (sorted.len() - 1) as f64 * q;
    let lo = h.floor() as usize;
    let frac = h - lo as f64;
    match sorted.get(lo + 1) {
        Some(&next) if frac > 0.0 => sorted[lo] + frac * (next - sorted[lo]),
        _ => sorted[lo],
    }
}

pub fn descriptive(values: &[f64]) -> Result<DescriptiveStats, StatsError> {
    if values.is_empty() {
        return Err(StatsError::TooFewValues { needed: 1, got: 0 });
    }
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    let n = sorted.len() as f64;
    let mean = sorted.iter().sum::<f64>() / n;
    let std_dev = if sorted.len() > 1 {
        (sorted.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt()
    } else {
        0.0
    };
    Ok(DescriptiveStats {
        min: sorted[0],
        max: sorted[sorted.len() - 1],
        mean,
        median: quantile_sorted(&sorted, 0.5),
        std_dev,
        q1: quantile_sorted(&sorted, 0.25),
        q3: quantile_sorted(&sorted, 0.75),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn five_point_summary() {
        let d = descriptive(&[1., 2., 3., 4., 5.]).unwrap();
        assert_eq!((d.median, d.q1, d.q3), (3.0, 2.0, 4.0));
        assert_eq!((d.min, d.max, d.mean), (1.0, 5.0, 3.0));
        assert!((d.std_dev - 2.5f64.sqrt()).abs() < 1e-15);
    }

    #[test]
    fn single_value() {
        let d = descriptive(&[7.0]).unwrap();
        assert_eq!(
            (d.min, d.max, d.mean, d.median, d.q1, d.q3, d.std_dev),
            (7.0, 7.0, 7.0, 7.0, 7.0, 7.0, 0.0)
        );
    }

    #[test]
    fn two_table_endpoints() {
        let d = descriptive(&[72.85, 100.0]).unwrap();
        assert!((d.mean - 86.425).abs() < 1e-12);
        // h = 0.25 -> 72.85 + 0.25 * 27.15
        assert!((d.q1 - 79.6375).abs() < 1e-12);
    }

    #[test]
    fn interpolated_quartiles() {
        // n = 4: q1 at h = 0.75, q3 at h = 2.25
        let d = descriptive(&[4., 1., 3., 2.]).unwrap();
        assert_eq!((d.q1, d.median, d.q3), (1.75, 2.5, 3.25));
    }

    #[test]
    fn empty_is_an_error() {
        assert!(descriptive(&[]).is_err());
    }

    #[test]
    fn zero_variance_ci_collapses() {
        let ci = mean_ci(&[5., 5., 5., 5.]).unwrap();
        assert_eq!((ci.mean, ci.lo, ci.hi), (5.0, 5.0, 5.0));
    }

    #[test]
    fn two_point_ci_uses_t_with_one_df() {
        // t(0.975, 1) = cot(pi/40); s = sqrt(0.5), se = 0.5
        let t1 = 1.0 / (std::f64::consts::PI / 40.0).tan();
        assert!((t_critical(0.95, 1.0) - t1).abs() < 1e-6);
        let ci = mean_ci(&[0., 1.]).unwrap();
        let half = ci.hi - ci.mean;
        assert!((half - t1 * 0.5).abs() < 1e-6);
        assert!((half - 6.353).abs() < 1e-3);
    }

    #[test]
    fn t_quantiles_against_tables() {
        // standard t-table entries for the 97.5th percentile
        for (df, t) in [(2.0, 4.302_652_7), (5.0, 2.570_581_8), (10.0, 2.228_138_9), (30.0, 2.042_272_5)] {
            assert!((t_critical(0.95, df) - t).abs() < 1e-6, "df={df}");
        }
    }

    #[test]
    fn too_few_values_for_ci() {
        assert!(mean_ci(&[1.0]).is_err());
    }
}
