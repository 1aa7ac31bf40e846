//! Single-hidden-layer sigmoid network and its five trainers.
//!
//! The loss is `½ Σ (o_i − y_i)²` over the training rows. Parameters are
//! packed as `[W1 (row-major, hidden × inputs), b1, w2, b2]`.

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::optim::{bfgs, levenberg_marquardt, BfgsOptions, LmOptions, MAX_REJECTIONS};
use crate::stats::sigmoid;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Trainer {
    /// Batch gradient descent.
    Gd,
    /// Gradient descent with momentum.
    Gdm,
    /// Gradient descent with an adaptive learning rate.
    Gda,
    /// BFGS quasi-Newton.
    QuasiNewton,
    LevenbergMarquardt,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NnConfig {
    /// `None` means `2 · n_features + 1`.
    pub hidden_units: Option<usize>,
    pub max_epochs: usize,
    pub learning_rate: f64,
    pub momentum: f64,
    pub lr_adapt_up: f64,
    pub lr_adapt_down: f64,
    pub lm_lambda0: f64,
    /// Training stops once an epoch lowers the loss by less than this.
    pub tolerance: f64,
}

impl Default for NnConfig {
    fn default() -> Self {
        Self {
            hidden_units: None,
            max_epochs: 500,
            learning_rate: 0.01,
            momentum: 0.9,
            lr_adapt_up: 1.05,
            lr_adapt_down: 0.7,
            lm_lambda0: 1e-3,
            tolerance: 1e-6,
        }
    }
}

impl NnConfig {
    pub fn hidden_for(&self, n_features: usize) -> usize {
        self.hidden_units.unwrap_or(2 * n_features + 1).max(1)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Mlp {
    pub n_inputs: usize,
    pub n_hidden: usize,
    pub params: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainReport {
    pub epochs: usize,
    pub initial_loss: f64,
    pub final_loss: f64,
    pub converged: bool,
    /// Gave up after too many consecutive rejected steps.
    pub aborted: bool,
}

impl Mlp {
    pub fn n_params(n_inputs: usize, n_hidden: usize) -> usize {
        n_hidden * (n_inputs + 2) + 1
    }

    /// Uniform weights in `±1/√fan_in`.
    pub fn init(n_inputs: usize, n_hidden: usize, seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let s1 = 1.0 / ((n_inputs + 1) as f64).sqrt();
        let s2 = 1.0 / ((n_hidden + 1) as f64).sqrt();
        let first = n_hidden * (n_inputs + 1);
        let params = (0..Self::n_params(n_inputs, n_hidden))
            .map(|k| {
                let s = if k < first { s1 } else { s2 };
                rng.random_range(-s..=s)
            })
            .collect();
        Mlp {
            n_inputs,
            n_hidden,
            params,
        }
    }

    fn split(&self, p: &[f64]) -> (DMatrix<f64>, DVector<f64>, DVector<f64>, f64) {
        let (d, h) = (self.n_inputs, self.n_hidden);
        let w1 = DMatrix::from_row_slice(h, d, &p[..h * d]);
        let b1 = DVector::from_column_slice(&p[h * d..h * d + h]);
        let w2 = DVector::from_column_slice(&p[h * d + h..h * d + 2 * h]);
        (w1, b1, w2, p[h * d + 2 * h])
    }

    /// Hidden activations (`n × hidden`) and outputs.
    fn forward_with(&self, p: &[f64], x: &DMatrix<f64>) -> (DMatrix<f64>, DVector<f64>) {
        let (w1, b1, w2, b2) = self.split(p);
        let mut a = x * w1.transpose();
        for mut row in a.row_iter_mut() {
            for (k, v) in row.iter_mut().enumerate() {
                *v = sigmoid(*v + b1[k]);
            }
        }
        let o = (&a * w2).map(|z| sigmoid(z + b2));
        (a, o)
    }

    pub fn predict_scores(&self, x: &DMatrix<f64>) -> Vec<f64> {
        self.forward_with(&self.params, x).1.iter().copied().collect()
    }

    pub fn loss_at(&self, p: &[f64], x: &DMatrix<f64>, y: &[f64]) -> f64 {
        let (_, o) = self.forward_with(p, x);
        0.5 * o.iter().zip(y).map(|(o, y)| (o - y) * (o - y)).sum::<f64>()
    }

    /// Loss and its gradient by backpropagation.
    pub fn loss_grad_at(&self, p: &[f64], x: &DMatrix<f64>, y: &[f64]) -> (f64, DVector<f64>) {
        let (d, h) = (self.n_inputs, self.n_hidden);
        let (_, _, w2, _) = self.split(p);
        let (a, o) = self.forward_with(p, x);
        let n = x.nrows();
        let mut loss = 0.0;
        let mut delta_o = DVector::zeros(n);
        for i in 0..n {
            let r = o[i] - y[i];
            loss += 0.5 * r * r;
            delta_o[i] = r * o[i] * (1.0 - o[i]);
        }
        let g_w2 = a.tr_mul(&delta_o);
        let g_b2 = delta_o.sum();
        let mut delta_a = &delta_o * w2.transpose();
        delta_a.zip_apply(&a, |da, ak| *da *= ak * (1.0 - ak));
        let g_w1 = delta_a.tr_mul(x);
        let mut g = DVector::zeros(p.len());
        for k in 0..h {
            for j in 0..d {
                g[k * d + j] = g_w1[(k, j)];
            }
            g[h * d + k] = delta_a.column(k).sum();
            g[h * d + h + k] = g_w2[k];
        }
        g[h * d + 2 * h] = g_b2;
        (loss, g)
    }

    /// Residuals `o − y` and their Jacobian (`n × n_params`).
    pub fn residuals_jacobian_at(&self, p: &[f64], x: &DMatrix<f64>, y: &[f64]) -> (DVector<f64>, DMatrix<f64>) {
        let (d, h) = (self.n_inputs, self.n_hidden);
        let (_, _, w2, _) = self.split(p);
        let (a, o) = self.forward_with(p, x);
        let n = x.nrows();
        let mut j = DMatrix::zeros(n, p.len());
        let mut r = DVector::zeros(n);
        for i in 0..n {
            r[i] = o[i] - y[i];
            let dout = o[i] * (1.0 - o[i]);
            for k in 0..h {
                let dk = dout * w2[k] * a[(i, k)] * (1.0 - a[(i, k)]);
                for c in 0..d {
                    j[(i, k * d + c)] = dk * x[(i, c)];
                }
                j[(i, h * d + k)] = dk;
                j[(i, h * d + h + k)] = dout * a[(i, k)];
            }
            j[(i, h * d + 2 * h)] = dout;
        }
        (r, j)
    }

    pub fn train(&mut self, x: &DMatrix<f64>, y: &[u8], trainer: Trainer, cfg: &NnConfig) -> TrainReport {
        let yf: Vec<f64> = y.iter().map(|&v| f64::from(v)).collect();
        let initial_loss = self.loss_at(&self.params, x, &yf);
        let (epochs, converged, aborted) = match trainer {
            Trainer::Gd | Trainer::Gdm | Trainer::Gda => self.train_gd(x, &yf, trainer, cfg),
            Trainer::QuasiNewton => {
                let opts = BfgsOptions {
                    max_iter: cfg.max_epochs,
                    grad_tol: 1e-8,
                    f_tol: cfg.tolerance,
                };
                let res = bfgs(
                    |p| self.loss_grad_at(p.as_slice(), x, &yf),
                    DVector::from_column_slice(&self.params),
                    &opts,
                );
                self.params = res.x.iter().copied().collect();
                (res.iterations, res.converged, false)
            }
            Trainer::LevenbergMarquardt => {
                let opts = LmOptions {
                    max_iter: cfg.max_epochs,
                    lambda0: cfg.lm_lambda0,
                    tol: cfg.tolerance,
                };
                let res = levenberg_marquardt(
                    |p| self.residuals_jacobian_at(p.as_slice(), x, &yf),
                    DVector::from_column_slice(&self.params),
                    &opts,
                );
                self.params = res.x.iter().copied().collect();
                (res.iterations, res.converged, res.aborted)
            }
        };
        TrainReport {
            epochs,
            initial_loss,
            final_loss: self.loss_at(&self.params, x, &yf),
            converged,
            aborted,
        }
    }

    fn train_gd(&mut self, x: &DMatrix<f64>, y: &[f64], trainer: Trainer, cfg: &NnConfig) -> (usize, bool, bool) {
        let mut lr = cfg.learning_rate;
        let mut velocity = DVector::zeros(self.params.len());
        let mut p = DVector::from_column_slice(&self.params);
        let (mut loss, mut grad) = self.loss_grad_at(p.as_slice(), x, y);
        let mut best = (loss, p.clone());
        let mut rejections = 0;
        let mut epochs = 0;
        let mut converged = false;
        let mut aborted = false;
        while epochs < cfg.max_epochs {
            epochs += 1;
            let step = match trainer {
                Trainer::Gdm => {
                    velocity = &velocity * cfg.momentum - &grad * lr;
                    velocity.clone()
                }
                _ => -&grad * lr,
            };
            let candidate = &p + &step;
            let (new_loss, new_grad) = self.loss_grad_at(candidate.as_slice(), x, y);
            if !new_loss.is_finite() || (trainer == Trainer::Gda && new_loss > loss) {
                lr *= if trainer == Trainer::Gda { cfg.lr_adapt_down } else { 0.5 };
                velocity.fill(0.0);
                rejections += 1;
                if rejections >= MAX_REJECTIONS {
                    aborted = true;
                    break;
                }
                continue;
            }
            rejections = 0;
            if trainer == Trainer::Gda {
                lr *= cfg.lr_adapt_up;
            }
            let drop = loss - new_loss;
            p = candidate;
            loss = new_loss;
            grad = new_grad;
            if loss < best.0 {
                best = (loss, p.clone());
            }
            if drop.abs() < cfg.tolerance {
                converged = true;
                break;
            }
        }
        self.params = best.1.iter().copied().collect();
        (epochs, converged, aborted)
    }
}
