use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::kernel::KernelKind;
use crate::linalg::{lstsq, with_intercept};

/// Extreme learning machine: a fixed random hidden layer and least-squares
/// output weights.
///
/// Hidden unit `k` computes, from the random projection `z = w_k·x + b_k`,
/// either `z` (linear), `(z + 1)²` (polynomial), or
/// `exp(−γ‖x − c_k‖²)` around a random center `c_k` (RBF). All random
/// draws are uniform on `[−1, 1]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Elm {
    pub activation: KernelKind,
    /// `n_features × hidden`; RBF centers are stored column-wise here too.
    pub weights: DMatrix<f64>,
    pub biases: Vec<f64>,
    pub gamma: f64,
    /// Output bias first, then one weight per hidden unit.
    pub output: Vec<f64>,
    pub rank_deficient: bool,
}

impl Elm {
    pub fn fit(x: &DMatrix<f64>, y: &[u8], activation: KernelKind, hidden: usize, gamma: f64, seed: u64) -> Self {
        let hidden = hidden.max(1);
        let d = x.ncols();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let weights = DMatrix::from_fn(d, hidden, |_, _| rng.random_range(-1.0..=1.0));
        let biases: Vec<f64> = (0..hidden).map(|_| rng.random_range(-1.0..=1.0)).collect();
        let mut elm = Elm {
            activation,
            weights,
            biases,
            gamma,
            output: Vec::new(),
            rank_deficient: false,
        };
        let h = with_intercept(&elm.hidden(x));
        let t = DVector::from_iterator(y.len(), y.iter().map(|&v| f64::from(v)));
        let (beta, deficient) = lstsq(&h, &t);
        elm.output = beta.iter().copied().collect();
        elm.rank_deficient = deficient;
        elm
    }

    pub fn hidden(&self, x: &DMatrix<f64>) -> DMatrix<f64> {
        let (n, m) = (x.nrows(), self.weights.ncols());
        match self.activation {
            KernelKind::Linear | KernelKind::Polynomial => {
                let mut z = x * &self.weights;
                for j in 0..m {
                    for i in 0..n {
                        let v = z[(i, j)] + self.biases[j];
                        z[(i, j)] = if self.activation == KernelKind::Linear {
                            v
                        } else {
                            (v + 1.0) * (v + 1.0)
                        };
                    }
                }
                z
            }
            KernelKind::Rbf => DMatrix::from_fn(n, m, |i, j| {
                let d2: f64 = (0..x.ncols())
                    .map(|c| (x[(i, c)] - self.weights[(c, j)]).powi(2))
                    .sum();
                (-self.gamma * d2).exp()
            }),
        }
    }

    pub fn score(&self, x: &DMatrix<f64>) -> Vec<f64> {
        let h = with_intercept(&self.hidden(x));
        (h * DVector::from_column_slice(&self.output)).iter().copied().collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn xor() -> (DMatrix<f64>, Vec<u8>) {
        (
            DMatrix::from_row_slice(4, 2, &[1.0, 1.0, -1.0, -1.0, 1.0, -1.0, -1.0, 1.0]),
            vec![0, 0, 1, 1],
        )
    }

    fn accuracy(elm: &Elm, x: &DMatrix<f64>, y: &[u8]) -> f64 {
        let s = elm.score(x);
        s.iter().zip(y).filter(|(s, &y)| u8::from(**s >= 0.5) == y).count() as f64 / y.len() as f64
    }

    #[test]
    fn interpolates_with_enough_hidden_units() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let x = DMatrix::from_fn(20, 20, |_, _| rng.random_range(-2.0..2.0));
        let y: Vec<u8> = (0..20).map(|i| u8::from(i % 3 == 0)).collect();
        for act in [KernelKind::Linear, KernelKind::Polynomial, KernelKind::Rbf] {
            let elm = Elm::fit(&x, &y, act, 20, 0.05, 4);
            assert_eq!(accuracy(&elm, &x, &y), 1.0, "{act:?}");
        }
    }

    #[test]
    fn one_unit_cannot_solve_xor() {
        let (x, y) = xor();
        for seed in 0..50 {
            for act in [KernelKind::Linear, KernelKind::Rbf] {
                let elm = Elm::fit(&x, &y, act, 1, 0.5, seed);
                assert!(accuracy(&elm, &x, &y) <= 0.75);
            }
        }
    }

    #[test]
    fn seeded() {
        let (x, y) = xor();
        assert_eq!(
            Elm::fit(&x, &y, KernelKind::Rbf, 3, 0.5, 7),
            Elm::fit(&x, &y, KernelKind::Rbf, 3, 0.5, 7)
        );
    }
}
