use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum KernelKind {
    Linear,
    Polynomial,
    Rbf,
}

/// A kernel with its hyperparameters resolved.
///
/// Linear is `x·z`, polynomial `(gamma·x·z + coef0)^degree`, and RBF
/// `exp(−gamma‖x − z‖²)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KernelSpec {
    pub kind: KernelKind,
    pub degree: u32,
    pub gamma: f64,
    pub coef0: f64,
}

impl KernelSpec {
    pub const DEFAULT_DEGREE: u32 = 2;
    pub const DEFAULT_COEF0: f64 = 1.0;

    /// Defaults for `n_features` inputs; `gamma` is `1 / n_features`.
    pub fn new(kind: KernelKind, n_features: usize) -> Self {
        Self {
            kind,
            degree: Self::DEFAULT_DEGREE,
            gamma: 1.0 / n_features.max(1) as f64,
            coef0: Self::DEFAULT_COEF0,
        }
    }

    pub fn linear() -> Self {
        Self::new(KernelKind::Linear, 1)
    }

    pub fn rbf(gamma: f64) -> Self {
        Self {
            gamma,
            ..Self::new(KernelKind::Rbf, 1)
        }
    }

    pub fn polynomial(degree: u32, gamma: f64, coef0: f64) -> Self {
        Self {
            degree,
            gamma,
            coef0,
            ..Self::new(KernelKind::Polynomial, 1)
        }
    }

    pub fn eval(&self, a: &[f64], b: &[f64]) -> f64 {
        match self.kind {
            KernelKind::Linear => dot(a, b),
            KernelKind::Polynomial => (self.gamma * dot(a, b) + self.coef0).powi(self.degree as i32),
            KernelKind::Rbf => {
                let d2: f64 = a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum();
                (-self.gamma * d2).exp()
            }
        }
    }

    /// Symmetric Gram matrix of the rows of `x`.
    pub fn gram(&self, x: &DMatrix<f64>) -> DMatrix<f64> {
        let rows = rows_of(x);
        let n = rows.len();
        let mut k = DMatrix::zeros(n, n);
        for i in 0..n {
            for j in 0..=i {
                let v = self.eval(&rows[i], &rows[j]);
                k[(i, j)] = v;
                k[(j, i)] = v;
            }
        }
        k
    }

    /// `K[i][j] = k(a_i, b_j)`.
    pub fn cross(&self, a: &DMatrix<f64>, b: &DMatrix<f64>) -> DMatrix<f64> {
        let ra = rows_of(a);
        let rb = rows_of(b);
        DMatrix::from_fn(ra.len(), rb.len(), |i, j| self.eval(&ra[i], &rb[j]))
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub(crate) fn rows_of(x: &DMatrix<f64>) -> Vec<Vec<f64>> {
    x.row_iter().map(|r| r.iter().copied().collect()).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample() -> DMatrix<f64> {
        DMatrix::from_row_slice(4, 2, &[0.0, 1.0, 1.5, -2.0, 3.0, 0.5, -1.0, -1.0])
    }

    #[test]
    fn gram_is_symmetric_and_rbf_has_unit_diagonal() {
        let x = sample();
        for spec in [KernelSpec::linear(), KernelSpec::polynomial(2, 1.0, 1.0), KernelSpec::rbf(0.5)] {
            let k = spec.gram(&x);
            assert_eq!(k, k.transpose());
        }
        let k = KernelSpec::rbf(0.5).gram(&x);
        assert!(k.diagonal().iter().all(|&v| v == 1.0));
    }

    #[test]
    fn gram_is_psd_up_to_jitter() {
        let x = sample();
        for spec in [KernelSpec::linear(), KernelSpec::polynomial(2, 1.0, 1.0), KernelSpec::rbf(0.5)] {
            let mut k = spec.gram(&x);
            for i in 0..k.nrows() {
                k[(i, i)] += 1e-8;
            }
            assert!(k.cholesky().is_some(), "{spec:?}");
        }
    }

    #[test]
    fn polynomial_value() {
        let k = KernelSpec::polynomial(2, 1.0, 1.0);
        assert_eq!(k.eval(&[1.0, 2.0], &[3.0, 4.0]), 144.0);
        let k = KernelSpec::polynomial(2, 0.5, 1.0);
        assert_eq!(k.eval(&[1.0, 2.0], &[3.0, 4.0]), 42.25);
    }

    #[test]
    fn default_gamma_is_inverse_feature_count() {
        assert_eq!(KernelSpec::new(KernelKind::Rbf, 4).gamma, 0.25);
    }
}
