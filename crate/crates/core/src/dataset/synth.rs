use nalgebra::DMatrix;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use super::{DatasetError, Metric, MetricDataset};

/// Parameters of a planted-signal dataset.
///
/// Informative columns are `N(0, 1)` for unchanged rows and
/// `N(separation, 1)` for changed rows, so the class-mean gap is
/// `separation` within-class standard deviations. Noise columns are `N(0, 1)`
/// for both classes.
#[derive(Debug, Clone, PartialEq)]
pub struct SynthSpec {
    pub n_rows: usize,
    pub informative: Vec<Metric>,
    pub noise: Vec<Metric>,
    pub separation: f64,
    pub seed: u64,
    /// Fraction of rows labelled changed (clamped so both classes appear).
    pub changed_fraction: f64,
}

impl SynthSpec {
    pub fn new(n_rows: usize, informative: Vec<Metric>, noise: Vec<Metric>, separation: f64, seed: u64) -> Self {
        Self {
            n_rows,
            informative,
            noise,
            separation,
            seed,
            changed_fraction: 0.5,
        }
    }

    /// Informative columns as given; every other canonical metric is noise.
    pub fn with_all_noise(n_rows: usize, informative: Vec<Metric>, separation: f64, seed: u64) -> Self {
        let noise = Metric::ALL
            .iter()
            .copied()
            .filter(|m| !informative.contains(m))
            .collect();
        Self::new(n_rows, informative, noise, separation, seed)
    }

    pub fn changed_fraction(mut self, f: f64) -> Self {
        self.changed_fraction = f;
        self
    }
}

/// Generates a labelled dataset with planted signal; bit-identical per seed.
pub fn synthesize(spec: &SynthSpec) -> Result<MetricDataset, DatasetError> {
    if spec.n_rows < 4 {
        return Err(DatasetError::TooFewRows(spec.n_rows));
    }
    if !(spec.separation.is_finite() && spec.separation >= 0.0) {
        return Err(DatasetError::BadSeparation(spec.separation));
    }
    if let Some(&m) = spec.informative.iter().find(|m| spec.noise.contains(m)) {
        return Err(DatasetError::OverlappingColumns(m));
    }
    let mut columns: Vec<Metric> = spec.informative.iter().chain(&spec.noise).copied().collect();
    let before = columns.len();
    Metric::canonicalize(&mut columns);
    if columns.len() != before {
        // a metric listed twice within one set
        let dup = spec
            .informative
            .iter()
            .chain(&spec.noise)
            .enumerate()
            .find(|(i, m)| spec.informative.iter().chain(&spec.noise).take(*i).any(|p| p == *m))
            .map(|(_, &m)| m)
            .unwrap_or(columns[0]);
        return Err(DatasetError::DuplicateColumn(dup.to_string()));
    }

    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let n = spec.n_rows;
    let n_changed = ((n as f64 * spec.changed_fraction).round() as usize).clamp(1, n - 1);
    let mut labels: Vec<u8> = (0..n).map(|i| u8::from(i < n_changed)).collect();
    labels.shuffle(&mut rng);

    let mut data = DMatrix::zeros(n, columns.len());
    for (i, &label) in labels.iter().enumerate() {
        for (j, m) in columns.iter().enumerate() {
            let z: f64 = rng.sample(StandardNormal);
            let shift = if label == 1 && spec.informative.contains(m) {
                spec.separation
            } else {
                0.0
            };
            data[(i, j)] = z + shift;
        }
    }
    MetricDataset::new(
        format!("synth-{}", spec.seed),
        format!("synthetic (seed {})", spec.seed),
        columns,
        data,
        labels,
    )
}

/// Two concentric noisy rings in the (DIT, NOC) plane.
///
/// The inner ring (radius 1) is labelled changed, the outer ring (radius 3)
/// unchanged; radial noise has standard deviation 0.15. No linear boundary
/// separates the classes.
pub fn two_rings(n_rows: usize, seed: u64) -> Result<MetricDataset, DatasetError> {
    if n_rows < 4 {
        return Err(DatasetError::TooFewRows(n_rows));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut data = DMatrix::zeros(n_rows, 2);
    let mut labels = Vec::with_capacity(n_rows);
    for i in 0..n_rows {
        let inner = i % 2 == 0;
        let radius = if inner { 1.0 } else { 3.0 };
        let theta = rng.random_range(0.0..std::f64::consts::TAU);
        let noise: f64 = rng.sample(StandardNormal);
        let r = radius + 0.15 * noise;
        data[(i, 0)] = r * theta.cos();
        data[(i, 1)] = r * theta.sin();
        labels.push(u8::from(inner));
    }
    MetricDataset::new(
        format!("rings-{seed}"),
        "two rings",
        vec![Metric::Dit, Metric::Noc],
        data,
        labels,
    )
}

#[cfg(test)]
mod tests {
    use super::*;

    fn spec(sep: f64, seed: u64) -> SynthSpec {
        SynthSpec::new(
            200,
            vec![Metric::Loc],
            vec![Metric::Dit, Metric::Cbo],
            sep,
            seed,
        )
    }

    #[test]
    fn same_seed_is_bit_identical() {
        let a = synthesize(&spec(2.0, 7)).unwrap();
        let b = synthesize(&spec(2.0, 7)).unwrap();
        assert_eq!(a, b);
        let c = synthesize(&spec(2.0, 8)).unwrap();
        assert_ne!(a.data(), c.data());
    }

    #[test]
    fn no_planted_signal_at_zero_separation() {
        let ds = synthesize(&spec(0.0, 3)).unwrap();
        for &m in ds.columns() {
            let (a, b) = ds.split_by_label(m).unwrap();
            let gap = a.iter().sum::<f64>() / a.len() as f64 - b.iter().sum::<f64>() / b.len() as f64;
            // sampling noise of a mean difference with n=100 per group is ~0.14
            assert!(gap.abs() < 0.6, "{m}: {gap}");
        }
    }

    #[test]
    fn columns_come_out_in_canonical_order() {
        let ds = synthesize(&spec(1.0, 1)).unwrap();
        assert_eq!(ds.columns(), &[Metric::Dit, Metric::Cbo, Metric::Loc]);
    }

    #[test]
    fn validates_inputs() {
        let mut s = spec(1.0, 1);
        s.noise.push(Metric::Loc);
        assert!(matches!(synthesize(&s), Err(DatasetError::OverlappingColumns(Metric::Loc))));
        let mut s = spec(1.0, 1);
        s.n_rows = 3;
        assert!(matches!(synthesize(&s), Err(DatasetError::TooFewRows(3))));
        let s = spec(-1.0, 1);
        assert!(matches!(synthesize(&s), Err(DatasetError::BadSeparation(_))));
    }

    #[test]
    fn changed_fraction_is_respected() {
        let ds = synthesize(&spec(1.0, 1).changed_fraction(0.3)).unwrap();
        assert_eq!(ds.labels().iter().filter(|&&l| l == 1).count(), 60);
    }

    #[test]
    fn rings_are_balanced() {
        let ds = two_rings(100, 1).unwrap();
        assert_eq!(ds.labels().iter().filter(|&&l| l == 1).count(), 50);
    }
}
