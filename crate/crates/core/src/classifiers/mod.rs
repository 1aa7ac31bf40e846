//! The eighteen base classifiers behind a single fit/score/predict contract.
//!
//! Every model standardizes its inputs with constants learned on the
//! training rows, computes a real-valued score, and predicts "changed" when
//! the score is at or above the model's threshold. Probability-like models
//! (regressions, tree, ELM, networks) use 0.5; margin models (SVM, LS-SVM)
//! use 0.

mod elm;
mod kernel;
mod lssvm;
mod nn;
mod scaler;
mod svm;
mod tree;

use std::fmt;
use std::str::FromStr;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

pub use elm::Elm;
pub use kernel::{KernelKind, KernelSpec};
pub use lssvm::{solve_lssvm, LssvmSolution};
pub use nn::{Mlp, NnConfig, TrainReport, Trainer};
pub use scaler::Standardizer;
pub use svm::{dual_objective, smo, SmoSolution};
pub use tree::{gini, DecisionTree, Node, TreeConfig};

use crate::linalg::{lstsq, solve_spd, with_intercept};
use crate::stats::fit_logistic;

/// Version tag written into serialized models.
pub const MODEL_FORMAT_VERSION: u32 = 1;

/// The 18 base learners followed by the 3 ensembles.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum ClassifierKind {
    #[serde(rename = "LINR")]
    Linr,
    #[serde(rename = "POLYR")]
    Polyr,
    #[serde(rename = "LOGR")]
    Logr,
    #[serde(rename = "DT")]
    Dt,
    #[serde(rename = "SVM-LIN")]
    SvmLin,
    #[serde(rename = "SVM-POLY")]
    SvmPoly,
    #[serde(rename = "SVM-RBF")]
    SvmRbf,
    #[serde(rename = "ELM-LIN")]
    ElmLin,
    #[serde(rename = "ELM-POLY")]
    ElmPoly,
    #[serde(rename = "ELM-RBF")]
    ElmRbf,
    #[serde(rename = "LSSVM-LIN")]
    LssvmLin,
    #[serde(rename = "LSSVM-POLY")]
    LssvmPoly,
    #[serde(rename = "LSSVM-RBF")]
    LssvmRbf,
    #[serde(rename = "NGD")]
    Ngd,
    #[serde(rename = "NGDM")]
    Ngdm,
    #[serde(rename = "NGDA")]
    Ngda,
    #[serde(rename = "NNM")]
    Nnm,
    #[serde(rename = "NLM")]
    Nlm,
    #[serde(rename = "MVE")]
    Mve,
    #[serde(rename = "BTE")]
    Bte,
    #[serde(rename = "NDTF")]
    Ndtf,
}

impl ClassifierKind {
    pub const BASE: [ClassifierKind; 18] = [
        ClassifierKind::Linr,
        ClassifierKind::Polyr,
        ClassifierKind::Logr,
        ClassifierKind::Dt,
        ClassifierKind::SvmLin,
        ClassifierKind::SvmPoly,
        ClassifierKind::SvmRbf,
        ClassifierKind::ElmLin,
        ClassifierKind::ElmPoly,
        ClassifierKind::ElmRbf,
        ClassifierKind::LssvmLin,
        ClassifierKind::LssvmPoly,
        ClassifierKind::LssvmRbf,
        ClassifierKind::Ngd,
        ClassifierKind::Ngdm,
        ClassifierKind::Ngda,
        ClassifierKind::Nnm,
        ClassifierKind::Nlm,
    ];

    pub const ENSEMBLES: [ClassifierKind; 3] = [ClassifierKind::Mve, ClassifierKind::Bte, ClassifierKind::Ndtf];

    pub const ALL: [ClassifierKind; 21] = [
        ClassifierKind::Linr,
        ClassifierKind::Polyr,
        ClassifierKind::Logr,
        ClassifierKind::Dt,
        ClassifierKind::SvmLin,
        ClassifierKind::SvmPoly,
        ClassifierKind::SvmRbf,
        ClassifierKind::ElmLin,
        ClassifierKind::ElmPoly,
        ClassifierKind::ElmRbf,
        ClassifierKind::LssvmLin,
        ClassifierKind::LssvmPoly,
        ClassifierKind::LssvmRbf,
        ClassifierKind::Ngd,
        ClassifierKind::Ngdm,
        ClassifierKind::Ngda,
        ClassifierKind::Nnm,
        ClassifierKind::Nlm,
        ClassifierKind::Mve,
        ClassifierKind::Bte,
        ClassifierKind::Ndtf,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            ClassifierKind::Linr => "LINR",
            ClassifierKind::Polyr => "POLYR",
            ClassifierKind::Logr => "LOGR",
            ClassifierKind::Dt => "DT",
            ClassifierKind::SvmLin => "SVM-LIN",
            ClassifierKind::SvmPoly => "SVM-POLY",
            ClassifierKind::SvmRbf => "SVM-RBF",
            ClassifierKind::ElmLin => "ELM-LIN",
            ClassifierKind::ElmPoly => "ELM-POLY",
            ClassifierKind::ElmRbf => "ELM-RBF",
            ClassifierKind::LssvmLin => "LSSVM-LIN",
            ClassifierKind::LssvmPoly => "LSSVM-POLY",
            ClassifierKind::LssvmRbf => "LSSVM-RBF",
            ClassifierKind::Ngd => "NGD",
            ClassifierKind::Ngdm => "NGDM",
            ClassifierKind::Ngda => "NGDA",
            ClassifierKind::Nnm => "NNM",
            ClassifierKind::Nlm => "NLM",
            ClassifierKind::Mve => "MVE",
            ClassifierKind::Bte => "BTE",
            ClassifierKind::Ndtf => "NDTF",
        }
    }

    pub fn is_ensemble(self) -> bool {
        Self::ENSEMBLES.contains(&self)
    }

    /// Position in [`ClassifierKind::ALL`].
    pub fn index(self) -> usize {
        Self::ALL.iter().position(|&k| k == self).expect("listed")
    }

    fn kernel_kind(self) -> Option<KernelKind> {
        use ClassifierKind::*;
        match self {
            SvmLin | ElmLin | LssvmLin => Some(KernelKind::Linear),
            SvmPoly | ElmPoly | LssvmPoly => Some(KernelKind::Polynomial),
            SvmRbf | ElmRbf | LssvmRbf => Some(KernelKind::Rbf),
            _ => None,
        }
    }

    fn trainer(self) -> Option<Trainer> {
        match self {
            ClassifierKind::Ngd => Some(Trainer::Gd),
            ClassifierKind::Ngdm => Some(Trainer::Gdm),
            ClassifierKind::Ngda => Some(Trainer::Gda),
            ClassifierKind::Nnm => Some(Trainer::QuasiNewton),
            ClassifierKind::Nlm => Some(Trainer::LevenbergMarquardt),
            _ => None,
        }
    }
}

impl fmt::Display for ClassifierKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for ClassifierKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let s = s.trim();
        if s.eq_ignore_ascii_case("POLR") {
            return Ok(ClassifierKind::Polyr);
        }
        ClassifierKind::ALL
            .iter()
            .copied()
            .find(|k| k.as_str().eq_ignore_ascii_case(s))
            .ok_or_else(|| format!("unknown classifier `{s}`"))
    }
}

/// Every base-learner hyperparameter.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassifierConfig {
    /// Ridge on the degree-2 expansion (intercept unpenalized); 0 gives the
    /// minimum-norm least-squares fit.
    pub polyr_ridge: f64,
    pub logr_ridge: f64,
    pub tree: TreeConfig,
    pub svm_c: f64,
    pub svm_tolerance: f64,
    pub svm_max_iter: usize,
    pub lssvm_gamma: f64,
    pub poly_degree: u32,
    pub poly_coef0: f64,
    /// Polynomial and RBF kernel width; `None` means `1 / n_features`.
    pub kernel_gamma: Option<f64>,
    /// `None` means `min(n_rows, 50)`.
    pub elm_hidden: Option<usize>,
    pub nn: NnConfig,
}

impl Default for ClassifierConfig {
    fn default() -> Self {
        Self {
            polyr_ridge: 10.0,
            logr_ridge: 1e-6,
            tree: TreeConfig::default(),
            svm_c: 1.0,
            svm_tolerance: 1e-3,
            svm_max_iter: 100_000,
            lssvm_gamma: 10.0,
            poly_degree: KernelSpec::DEFAULT_DEGREE,
            poly_coef0: KernelSpec::DEFAULT_COEF0,
            kernel_gamma: None,
            elm_hidden: None,
            nn: NnConfig::default(),
        }
    }
}

impl ClassifierConfig {
    /// Checks the hyperparameters `kind` uses.
    pub fn validate(&self, kind: ClassifierKind) -> Result<(), ClassifierError> {
        use ClassifierKind::*;
        let positive = |name: &str, v: f64| {
            if v > 0.0 && v.is_finite() {
                Ok(())
            } else {
                Err(ClassifierError::InvalidParameter(format!("{name} must be positive, got {v}")))
            }
        };
        if let Some(g) = self.kernel_gamma {
            if kind.kernel_kind().is_some() {
                positive("kernel_gamma", g)?;
            }
        }
        match kind {
            Polyr if !(self.polyr_ridge >= 0.0) => Err(ClassifierError::InvalidParameter(format!(
                "polyr_ridge must be non-negative, got {}",
                self.polyr_ridge
            ))),
            SvmLin | SvmPoly | SvmRbf => positive("svm_c", self.svm_c),
            LssvmLin | LssvmPoly | LssvmRbf => positive("lssvm_gamma", self.lssvm_gamma),
            Ngd | Ngdm | Ngda => positive("nn_learning_rate", self.nn.learning_rate),
            _ => Ok(()),
        }
    }

    pub fn kernel(&self, kind: KernelKind, n_features: usize) -> KernelSpec {
        let mut k = KernelSpec::new(kind, n_features);
        k.degree = self.poly_degree;
        k.coef0 = self.poly_coef0;
        if let Some(g) = self.kernel_gamma {
            k.gamma = g;
        }
        k
    }
}

#[derive(Debug, thiserror::Error, PartialEq)]
pub enum ClassifierError {
    #[error("model expects {expected} features, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("{rows} rows but {labels} labels")]
    LabelCount { rows: usize, labels: usize },
    #[error("no training rows")]
    Empty,
    #[error("{0} is an ensemble; fit it from base models")]
    NotABaseLearner(ClassifierKind),
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
}

/// Fitted numeric state of a base learner.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum ModelState {
    /// Fixed score; used when a training set holds one class only.
    Constant { score: f64 },
    /// Least squares on the label, optionally on a degree-2 expansion.
    Linear {
        intercept: f64,
        weights: Vec<f64>,
        polynomial: bool,
    },
    Logistic { intercept: f64, coefficients: Vec<f64> },
    Tree(DecisionTree),
    /// SVM or LS-SVM expansion `Σ coef_k K(sv_k, x) + bias`.
    Kernel {
        kernel: KernelSpec,
        support: DMatrix<f64>,
        coef: Vec<f64>,
        bias: f64,
    },
    Elm(Elm),
    Network(Mlp),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainedModel {
    pub format_version: u32,
    pub kind: ClassifierKind,
    pub n_features: usize,
    pub scaler: Standardizer,
    pub threshold: f64,
    pub state: ModelState,
    /// Numerical events during fitting (pseudo-inverse, jitter, non-convergence).
    pub flags: Vec<String>,
}

/// Squares and pairwise products appended to the linear terms.
pub fn polynomial_features(z: &DMatrix<f64>) -> DMatrix<f64> {
    let (n, d) = z.shape();
    let m = d + d * (d + 1) / 2;
    let mut out = DMatrix::zeros(n, m);
    for i in 0..n {
        let mut c = 0;
        for j in 0..d {
            out[(i, c)] = z[(i, j)];
            c += 1;
        }
        for j in 0..d {
            for k in j..d {
                out[(i, c)] = z[(i, j)] * z[(i, k)];
                c += 1;
            }
        }
    }
    out
}

/// Least squares with an optional ridge that spares column 0.
fn least_squares(a: &DMatrix<f64>, t: &DVector<f64>, ridge: f64) -> (DVector<f64>, bool) {
    if ridge > 0.0 {
        let mut g = a.tr_mul(a);
        for i in 1..g.nrows() {
            g[(i, i)] += ridge;
        }
        let rhs = a.tr_mul(t);
        if let Some(beta) = solve_spd(&g, &rhs) {
            return (beta, false);
        }
    }
    lstsq(a, t)
}

fn pm_one(y: &[u8]) -> Vec<f64> {
    y.iter().map(|&v| if v == 1 { 1.0 } else { -1.0 }).collect()
}

/// Fits one base learner on raw (unscaled) features.
pub fn fit(
    kind: ClassifierKind,
    x: &DMatrix<f64>,
    y: &[u8],
    cfg: &ClassifierConfig,
    seed: u64,
) -> Result<TrainedModel, ClassifierError> {
    if kind.is_ensemble() {
        return Err(ClassifierError::NotABaseLearner(kind));
    }
    if x.nrows() != y.len() {
        return Err(ClassifierError::LabelCount {
            rows: x.nrows(),
            labels: y.len(),
        });
    }
    if y.is_empty() {
        return Err(ClassifierError::Empty);
    }
    cfg.validate(kind)?;
    let (scaler, z) = Standardizer::fit_transform(x);
    let d = x.ncols();
    let mut flags = Vec::new();
    let positives = y.iter().filter(|&&v| v == 1).count();
    let mut threshold = 0.5;

    let state = if positives == 0 || positives == y.len() {
        flags.push("single-class training data; constant prediction".to_string());
        ModelState::Constant {
            score: if positives > 0 { 1.0 } else { 0.0 },
        }
    } else {
        use ClassifierKind::*;
        match kind {
            Linr | Polyr => {
                let polynomial = kind == Polyr;
                let features = if polynomial { polynomial_features(&z) } else { z.clone() };
                let t = DVector::from_iterator(y.len(), y.iter().map(|&v| f64::from(v)));
                let ridge = if polynomial { cfg.polyr_ridge } else { 0.0 };
                let (beta, deficient) = least_squares(&with_intercept(&features), &t, ridge);
                if deficient {
                    flags.push("singular normal equations; minimum-norm solution".to_string());
                }
                ModelState::Linear {
                    intercept: beta[0],
                    weights: beta.iter().skip(1).copied().collect(),
                    polynomial,
                }
            }
            Logr => {
                let f = fit_logistic(&z, y, cfg.logr_ridge, 100);
                if !f.converged {
                    flags.push("logistic fit did not converge".to_string());
                }
                ModelState::Logistic {
                    intercept: f.intercept,
                    coefficients: f.coefficients,
                }
            }
            Dt => ModelState::Tree(DecisionTree::fit(&z, y, &cfg.tree)),
            SvmLin | SvmPoly | SvmRbf => {
                let kernel = cfg.kernel(kind.kernel_kind().expect("kernel model"), d);
                let ys = pm_one(y);
                let sol = smo(&kernel.gram(&z), &ys, cfg.svm_c, cfg.svm_tolerance, cfg.svm_max_iter);
                if !sol.converged {
                    flags.push(format!("SMO stopped after {} iterations", sol.iterations));
                }
                let (support, coef) = svm::support_expansion(&z, &ys, &sol.alpha);
                threshold = 0.0;
                ModelState::Kernel {
                    kernel,
                    support,
                    coef,
                    bias: sol.bias,
                }
            }
            LssvmLin | LssvmPoly | LssvmRbf => {
                let kernel = cfg.kernel(kind.kernel_kind().expect("kernel model"), d);
                let ys = pm_one(y);
                let sol = solve_lssvm(&kernel.gram(&z), &ys, cfg.lssvm_gamma);
                if sol.jitter > 0.0 {
                    flags.push(format!("diagonal jitter {:e}", sol.jitter));
                }
                threshold = 0.0;
                ModelState::Kernel {
                    kernel,
                    support: z.clone(),
                    coef: lssvm::expansion(&ys, &sol),
                    bias: sol.bias,
                }
            }
            ElmLin | ElmPoly | ElmRbf => {
                let act = kind.kernel_kind().expect("kernel model");
                let hidden = cfg.elm_hidden.unwrap_or(y.len().min(50));
                let gamma = cfg.kernel(KernelKind::Rbf, d).gamma;
                ModelState::Elm(Elm::fit(&z, y, act, hidden, gamma, seed))
            }
            Ngd | Ngdm | Ngda | Nnm | Nlm => {
                let mut net = Mlp::init(d, cfg.nn.hidden_for(d), seed);
                let report = net.train(&z, y, kind.trainer().expect("network"), &cfg.nn);
                if report.aborted {
                    flags.push("training aborted after repeated rejected steps".to_string());
                }
                ModelState::Network(net)
            }
            Mve | Bte | Ndtf => unreachable!("rejected above"),
        }
    };
    Ok(TrainedModel {
        format_version: MODEL_FORMAT_VERSION,
        kind,
        n_features: d,
        scaler,
        threshold,
        state,
        flags,
    })
}

impl TrainedModel {
    /// Real-valued scores, compared against [`TrainedModel::threshold`].
    pub fn score(&self, x: &DMatrix<f64>) -> Result<Vec<f64>, ClassifierError> {
        if x.ncols() != self.n_features {
            return Err(ClassifierError::DimensionMismatch {
                expected: self.n_features,
                got: x.ncols(),
            });
        }
        if x.nrows() == 0 {
            return Ok(Vec::new());
        }
        let z = self.scaler.transform(x);
        Ok(match &self.state {
            ModelState::Constant { score } => vec![*score; x.nrows()],
            ModelState::Linear {
                intercept,
                weights,
                polynomial,
            } => {
                let f = if *polynomial { polynomial_features(&z) } else { z };
                (f * DVector::from_column_slice(weights)).iter().map(|v| v + intercept).collect()
            }
            ModelState::Logistic {
                intercept,
                coefficients,
            } => (z * DVector::from_column_slice(coefficients))
                .iter()
                .map(|v| crate::stats::sigmoid(v + intercept))
                .collect(),
            ModelState::Tree(t) => z
                .row_iter()
                .map(|r| t.score_row(&r.iter().copied().collect::<Vec<_>>()))
                .collect(),
            ModelState::Kernel {
                kernel,
                support,
                coef,
                bias,
            } => svm::kernel_decision(kernel, support, coef, *bias, &z),
            ModelState::Elm(e) => e.score(&z),
            ModelState::Network(n) => n.predict_scores(&z),
        })
    }

    /// `1` where the score is at or above the threshold.
    pub fn predict(&self, x: &DMatrix<f64>) -> Result<Vec<u8>, ClassifierError> {
        Ok(self
            .score(x)?
            .into_iter()
            .map(|s| u8::from(s >= self.threshold))
            .collect())
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("model serializes")
    }

    pub fn from_json(s: &str) -> Result<Self, serde_json::Error> {
        serde_json::from_str(s)
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

    fn train_accuracy(kind: ClassifierKind, x: &DMatrix<f64>, y: &[u8]) -> f64 {
        let m = fit(kind, x, y, &ClassifierConfig::default(), 0).unwrap();
        let p = m.predict(x).unwrap();
        p.iter().zip(y).filter(|(a, b)| a == b).count() as f64 / y.len() as f64
    }

    #[test]
    fn names_round_trip() {
        for k in ClassifierKind::ALL {
            assert_eq!(k.as_str().parse::<ClassifierKind>().unwrap(), k);
            assert_eq!(serde_json::to_string(&k).unwrap(), format!("\"{k}\""));
        }
        assert_eq!(ClassifierKind::BASE.len(), 18);
    }

    #[test]
    fn xor_needs_the_cross_term() {
        let (x, y) = xor();
        assert_eq!(train_accuracy(ClassifierKind::Polyr, &x, &y), 1.0);
        assert_eq!(train_accuracy(ClassifierKind::Linr, &x, &y), 0.5);
    }

    #[test]
    fn constant_feature_gives_majority() {
        let x = DMatrix::from_element(5, 1, 3.0);
        let y = [1, 1, 1, 0, 0];
        let m = fit(ClassifierKind::Linr, &x, &y, &ClassifierConfig::default(), 0).unwrap();
        match &m.state {
            ModelState::Linear { weights, .. } => assert_eq!(weights[0], 0.0),
            _ => unreachable!(),
        }
        assert_eq!(m.predict(&x).unwrap(), vec![1; 5]);
    }

    #[test]
    fn separable_line_for_logr() {
        let x = DMatrix::from_column_slice(8, 1, &[0.0, 1.0, 2.0, 3.0, 10.0, 11.0, 12.0, 13.0]);
        assert_eq!(train_accuracy(ClassifierKind::Logr, &x, &[0, 0, 0, 0, 1, 1, 1, 1]), 1.0);
    }

    #[test]
    fn memorizing_tree_reproduces_labels() {
        let x = DMatrix::from_column_slice(8, 1, &[0.0, 1.0, 2.0, 3.0, 4.0, 5.0, 6.0, 7.0]);
        let y = [0, 0, 1, 1, 0, 0, 1, 1];
        assert_eq!(train_accuracy(ClassifierKind::Dt, &x, &y), 1.0);
    }

    #[test]
    fn predict_contract() {
        let (x, y) = xor();
        let m = fit(ClassifierKind::Logr, &x, &y, &ClassifierConfig::default(), 0).unwrap();
        assert!(m.predict(&DMatrix::zeros(0, 2)).unwrap().is_empty());
        assert_eq!(
            m.predict(&DMatrix::zeros(1, 3)),
            Err(ClassifierError::DimensionMismatch { expected: 2, got: 3 })
        );
        let tie = TrainedModel {
            state: ModelState::Constant { score: 0.5 },
            ..m
        };
        assert_eq!(tie.predict(&x).unwrap(), vec![1; 4]);
    }

    #[test]
    fn json_round_trip() {
        let (x, y) = xor();
        for kind in ClassifierKind::BASE {
            let m = fit(kind, &x, &y, &ClassifierConfig::default(), 2).unwrap();
            let back = TrainedModel::from_json(&m.to_json()).unwrap();
            assert_eq!(back.predict(&x).unwrap(), m.predict(&x).unwrap(), "{kind}");
        }
    }

    #[test]
    fn ensembles_are_not_base_learners() {
        let (x, y) = xor();
        assert!(fit(ClassifierKind::Mve, &x, &y, &ClassifierConfig::default(), 0).is_err());
    }
}
