use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};
use statrs::function::erf::erfc;

use super::StatsError;
use crate::linalg::{lstsq, solve_spd, with_intercept};

/// Significance level for univariate logistic coefficients (`p < 0.05`).
pub const ULR_ALPHA: f64 = 0.05;

/// Ridge strength applied when complete separation is detected.
pub const SEPARATION_RIDGE: f64 = 1e-6;

/// Standardized slopes beyond this magnitude are treated as diverging.
const DIVERGENCE_SLOPE: f64 = 25.0;

pub(crate) fn sigmoid(t: f64) -> f64 {
    if t >= 0.0 {
        1.0 / (1.0 + (-t).exp())
    } else {
        let e = t.exp();
        e / (1.0 + e)
    }
}

/// `ln(1 + e^t)` without overflow.
fn log1p_exp(t: f64) -> f64 {
    if t > 0.0 {
        t + (-t).exp().ln_1p()
    } else {
        t.exp().ln_1p()
    }
}

/// Maximum-likelihood (optionally ridge-penalized) logistic regression.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LogisticFit {
    pub intercept: f64,
    pub coefficients: Vec<f64>,
    /// Inverse of the (penalized) observed information, intercept first.
    pub covariance: DMatrix<f64>,
    pub log_likelihood: f64,
    pub iterations: usize,
    pub converged: bool,
}

impl LogisticFit {
    pub fn linear_predictor(&self, row: impl IntoIterator<Item = f64>) -> f64 {
        self.intercept
            + row
                .into_iter()
                .zip(&self.coefficients)
                .map(|(x, b)| x * b)
                .sum::<f64>()
    }

    pub fn probability(&self, row: impl IntoIterator<Item = f64>) -> f64 {
        sigmoid(self.linear_predictor(row))
    }
}

/// Log-likelihood of `beta` (intercept first) on a design with intercept column.
pub(crate) fn log_likelihood(design: &DMatrix<f64>, y: &[f64], beta: &DVector<f64>) -> f64 {
    let eta = design * beta;
    eta.iter()
        .zip(y)
        .map(|(&e, &yi)| yi * e - log1p_exp(e))
        .sum()
}

fn penalized(design: &DMatrix<f64>, y: &[f64], beta: &DVector<f64>, ridge: f64) -> f64 {
    let pen: f64 = beta.iter().skip(1).map(|b| b * b).sum();
    log_likelihood(design, y, beta) - 0.5 * ridge * pen
}

/// Newton-Raphson / IRLS on `x` (no intercept column; one is added).
///
/// The ridge penalty `ridge/2 · ||slopes||²` never touches the intercept.
/// Each Newton step is halved until the penalized likelihood does not drop.
pub fn fit_logistic(x: &DMatrix<f64>, y: &[u8], ridge: f64, max_iter: usize) -> LogisticFit {
    let design = with_intercept(x);
    let yf: Vec<f64> = y.iter().map(|&v| f64::from(v)).collect();
    let p = design.ncols();
    let mut beta = DVector::zeros(p);
    let mut iterations = 0;
    let mut converged = false;
    let mut objective = penalized(&design, &yf, &beta, ridge);

    let info = |beta: &DVector<f64>| -> (DVector<f64>, DMatrix<f64>) {
        let eta = &design * beta;
        let mut resid = DVector::zeros(design.nrows());
        let mut weighted = design.clone();
        for i in 0..design.nrows() {
            let pi = sigmoid(eta[i]);
            resid[i] = yf[i] - pi;
            let w = (pi * (1.0 - pi)).sqrt();
            weighted.row_mut(i).scale_mut(w);
        }
        let mut grad = design.tr_mul(&resid);
        let mut hess = weighted.tr_mul(&weighted);
        for j in 1..p {
            grad[j] -= ridge * beta[j];
            hess[(j, j)] += ridge;
        }
        (grad, hess)
    };

    while iterations < max_iter {
        iterations += 1;
        let (grad, hess) = info(&beta);
        if grad.amax() < 1e-11 {
            converged = true;
            break;
        }
        let step = solve_spd(&hess, &grad).unwrap_or_else(|| lstsq(&hess, &grad).0);
        let mut t = 1.0;
        let mut next = &beta + &step;
        let mut next_obj = penalized(&design, &yf, &next, ridge);
        while next_obj < objective - 1e-12 * objective.abs() && t > 1e-10 {
            t *= 0.5;
            next = &beta + &step * t;
            next_obj = penalized(&design, &yf, &next, ridge);
        }
        let moved = (&step * t).amax();
        beta = next;
        objective = next_obj;
        if moved < 1e-10 {
            converged = true;
            break;
        }
    }

    let (_, hess) = info(&beta);
    let covariance = hess
        .clone()
        .cholesky()
        .map(|c| c.inverse())
        .or_else(|| hess.clone().pseudo_inverse(1e-14).ok())
        .unwrap_or_else(|| DMatrix::from_element(p, p, f64::INFINITY));
    LogisticFit {
        intercept: beta[0],
        coefficients: beta.iter().skip(1).copied().collect(),
        covariance,
        log_likelihood: log_likelihood(&design, &yf, &beta),
        iterations,
        converged,
    }
}

/// Univariate logistic regression of the label on one metric.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct UlrResult {
    pub coefficient: f64,
    pub intercept: f64,
    pub std_error: f64,
    pub z: f64,
    /// Two-sided Wald p-value of the slope.
    pub coef_p_value: f64,
    /// `coef_p_value < 0.05`.
    pub significant: bool,
    /// Complete or quasi-complete separation: refit with a tiny ridge.
    pub separation: bool,
    /// Constant input; slope fixed at zero.
    pub zero_variance: bool,
    pub log_likelihood: f64,
    pub iterations: usize,
}

/// Fits `P(changed | x) = sigmoid(intercept + coefficient · x)` by IRLS.
///
/// The fit runs on the standardized metric and is mapped back to raw units.
/// If the slope diverges (separation) the fit is repeated with a
/// [`SEPARATION_RIDGE`] penalty and flagged.
pub fn ulr_fit(x: &[f64], labels: &[u8]) -> Result<UlrResult, StatsError> {
    if x.len() != labels.len() {
        return Err(StatsError::LengthMismatch {
            left: x.len(),
            right: labels.len(),
        });
    }
    if x.len() < 4 {
        return Err(StatsError::TooFewValues {
            needed: 4,
            got: x.len(),
        });
    }
    let n = x.len() as f64;
    let positives = labels.iter().filter(|&&l| l == 1).count();
    if positives == 0 || positives == labels.len() {
        return Err(StatsError::SingleClass);
    }
    let mean = x.iter().sum::<f64>() / n;
    let var = x.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n;
    if var == 0.0 || x.iter().all(|&v| v == x[0]) {
        let rate = positives as f64 / n;
        return Ok(UlrResult {
            coefficient: 0.0,
            intercept: (rate / (1.0 - rate)).ln(),
            std_error: f64::INFINITY,
            z: 0.0,
            coef_p_value: 1.0,
            significant: false,
            separation: false,
            zero_variance: true,
            log_likelihood: positives as f64 * rate.ln() + (n - positives as f64) * (1.0 - rate).ln(),
            iterations: 0,
        });
    }
    let sd = var.sqrt();
    let z_col = DMatrix::from_iterator(x.len(), 1, x.iter().map(|v| (v - mean) / sd));

    let mut fit = fit_logistic(&z_col, labels, 0.0, 50);
    let mut separation = false;
    if !fit.converged || fit.coefficients[0].abs() > DIVERGENCE_SLOPE {
        separation = true;
        fit = fit_logistic(&z_col, labels, SEPARATION_RIDGE, 500);
    }
    let slope_std = fit.coefficients[0];
    let se_std = fit.covariance[(1, 1)].max(0.0).sqrt();
    let coefficient = slope_std / sd;
    let intercept = fit.intercept - slope_std * mean / sd;
    let std_error = se_std / sd;
    let z = if se_std > 0.0 && se_std.is_finite() {
        slope_std / se_std
    } else {
        0.0
    };
    let p = erfc(z.abs() / std::f64::consts::SQRT_2).min(1.0);
    Ok(UlrResult {
        coefficient,
        intercept,
        std_error,
        z,
        coef_p_value: p,
        significant: p < ULR_ALPHA,
        separation,
        zero_variance: false,
        log_likelihood: fit.log_likelihood,
        iterations: fit.iterations,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn constant_input_has_no_information() {
        let r = ulr_fit(&[3.0; 6], &[1, 0, 1, 0, 1, 0]).unwrap();
        assert_eq!(r.coefficient, 0.0);
        assert_eq!(r.coef_p_value, 1.0);
        assert!(r.zero_variance && !r.significant);
    }

    #[test]
    fn anti_aligned_input_has_negative_slope() {
        let x = [1.0, 2.0, 3.0, 4.0, 5.0, 6.0];
        let y = [1, 1, 1, 0, 0, 0];
        let r = ulr_fit(&x, &y).unwrap();
        assert!(r.coefficient < 0.0);
        assert!(r.separation);
        assert!(r.coefficient.is_finite());
    }

    #[test]
    fn overlapping_data_converges_without_ridge() {
        let x = [1.0, 2.0, 3.0, 4.0, 5.0, 6.0, 7.0, 8.0];
        let y = [0, 0, 1, 0, 1, 0, 1, 1];
        let r = ulr_fit(&x, &y).unwrap();
        assert!(!r.separation);
        assert!(r.coefficient > 0.0);
        // score equations hold in raw units
        let mut g0 = 0.0;
        let mut g1 = 0.0;
        for (xi, &yi) in x.iter().zip(&y) {
            let resid = f64::from(yi) - sigmoid(r.intercept + r.coefficient * xi);
            g0 += resid;
            g1 += resid * xi;
        }
        assert!(g0.abs() < 1e-9 && g1.abs() < 1e-9);
    }

    #[test]
    fn rejects_bad_input() {
        assert!(matches!(ulr_fit(&[1.0, 2.0, 3.0], &[0, 1, 0]), Err(StatsError::TooFewValues { .. })));
        assert!(matches!(ulr_fit(&[1.0, 2.0, 3.0, 4.0], &[0, 0, 0, 0]), Err(StatsError::SingleClass)));
        assert!(matches!(ulr_fit(&[1.0, 2.0], &[0]), Err(StatsError::LengthMismatch { .. })));
    }
}
