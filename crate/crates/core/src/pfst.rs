//! The four-stage metric validation framework (PFST).
//!
//! Stages run in sequence and each one only ever removes metrics:
//!
//! 1. **Rank filter.** Keep metrics whose changed/unchanged distributions
//!    differ under the rank-sum test (`p <= 0.05`). The 95% confidence
//!    intervals of both group means are recorded alongside, as error-box data.
//! 2. **Univariate logistic filter.** Keep metrics whose ULR slope is
//!    significant (`p < 0.05`).
//! 3. **Correlation pruning.** Link survivors with `|r| >= 0.7`. Inside each
//!    connected group, score every single member and the whole group by
//!    cross-validated logistic-regression F-measure and keep the best
//!    candidate. Ties go to fewer metrics, then canonical order.
//! 4. **Forward stepwise selection.** Regress the 0/1 label on the
//!    survivors by least squares, admitting at each step the candidate with
//!    the smallest partial-F p-value while it is below 0.05.
//!
//! If stage 1 or 2 leaves nothing the framework falls back to all metrics.
//! If stage 4 admits nothing the single best stage-3 metric is used. Both
//! cases are flagged in the trace.

use std::collections::BTreeSet;
use std::io::Write;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, FisherSnedecor};

use crate::classifiers::Standardizer;
use crate::dataset::{Metric, MetricDataset};
use crate::feature_set::{FeatureSet, FeatureSetLabel, SelectionError};
use crate::harness::{make_folds, Confusion};
use crate::linalg::{lstsq, with_intercept};
use crate::stats::{
    correlation_of_columns, fit_logistic, mean_ci, rank_test, ulr_fit, CorrelationMatrix, MeanCI, RankTestResult,
    UlrResult, RANK_ALPHA, STRONG_R, ULR_ALPHA,
};

/// Thresholds and the CV seed used by stage 3.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PfstConfig {
    pub rank_alpha: f64,
    pub ulr_alpha: f64,
    pub correlation_threshold: f64,
    pub p_enter: f64,
    pub cv_folds: usize,
    pub seed: u64,
}

impl Default for PfstConfig {
    fn default() -> Self {
        Self {
            rank_alpha: RANK_ALPHA,
            ulr_alpha: ULR_ALPHA,
            correlation_threshold: STRONG_R,
            p_enter: 0.05,
            cv_folds: 5,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RankEntry {
    pub metric: Metric,
    pub test: RankTestResult,
    pub ci_changed: Option<MeanCI>,
    pub ci_unchanged: Option<MeanCI>,
    /// Whether the two mean confidence intervals overlap.
    pub ci_overlap: Option<bool>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UlrEntry {
    pub metric: Metric,
    pub fit: UlrResult,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CandidateScore {
    pub metrics: Vec<Metric>,
    pub f_measure: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorrelatedGroup {
    pub members: Vec<Metric>,
    pub candidates: Vec<CandidateScore>,
    pub chosen: Vec<Metric>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StepwiseStep {
    /// Entry p-value of every remaining candidate at this step.
    pub candidates: Vec<(Metric, f64)>,
    pub admitted: Option<Metric>,
}

/// Intermediate statistics of every stage.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PfstTrace {
    pub dataset_id: String,
    pub config: PfstConfig,
    pub all_metrics: Vec<Metric>,
    pub rank_tests: Vec<RankEntry>,
    pub stage1_survivors: Vec<Metric>,
    pub ulr: Vec<UlrEntry>,
    pub stage2_survivors: Vec<Metric>,
    pub correlation: Option<CorrelationMatrix>,
    pub groups: Vec<CorrelatedGroup>,
    pub stage3_survivors: Vec<Metric>,
    pub stepwise: Vec<StepwiseStep>,
    pub stage4_selected: Vec<Metric>,
    pub warnings: Vec<String>,
    pub fallback: Option<String>,
}

impl PfstTrace {
    /// Writes the stage-membership table (one row per metric).
    pub fn write_selection_grid<W: Write>(&self, w: &mut W) -> std::io::Result<()> {
        writeln!(w, "metric,stage1_rank_test,stage2_ulr,stage3_correlation,stage4_stepwise")?;
        for m in &self.all_metrics {
            writeln!(
                w,
                "{},{},{},{},{}",
                m,
                self.stage1_survivors.contains(m),
                self.stage2_survivors.contains(m),
                self.stage3_survivors.contains(m),
                self.stage4_selected.contains(m)
            )?;
        }
        Ok(())
    }

    /// `stage4 ⊆ stage3 ⊆ stage2 ⊆ stage1 ⊆ all`.
    pub fn is_monotone(&self) -> bool {
        let subset = |a: &[Metric], b: &[Metric]| a.iter().all(|m| b.contains(m));
        subset(&self.stage4_selected, &self.stage3_survivors)
            && subset(&self.stage3_survivors, &self.stage2_survivors)
            && subset(&self.stage2_survivors, &self.stage1_survivors)
            && subset(&self.stage1_survivors, &self.all_metrics)
    }
}

/// Stage 1 with its per-metric statistics.
pub fn rank_filter_detailed(ds: &MetricDataset, alpha: f64) -> Result<(Vec<Metric>, Vec<RankEntry>), SelectionError> {
    let mut entries = Vec::new();
    let mut survivors = Vec::new();
    let mut metrics = ds.columns().to_vec();
    Metric::canonicalize(&mut metrics);
    for m in metrics {
        let (changed, unchanged) = ds.split_by_label(m)?;
        let test = rank_test(&changed, &unchanged)?;
        let ci_changed = mean_ci(&changed).ok();
        let ci_unchanged = mean_ci(&unchanged).ok();
        let ci_overlap = match (&ci_changed, &ci_unchanged) {
            (Some(a), Some(b)) => Some(a.overlaps(b)),
            _ => None,
        };
        if test.p_value <= alpha {
            survivors.push(m);
        }
        entries.push(RankEntry {
            metric: m,
            test,
            ci_changed,
            ci_unchanged,
            ci_overlap,
        });
    }
    Ok((survivors, entries))
}

/// Keeps metrics whose changed/unchanged rank-sum test has `p <= 0.05`.
pub fn stage1_rank_filter(ds: &MetricDataset) -> Result<Vec<Metric>, SelectionError> {
    Ok(rank_filter_detailed(ds, RANK_ALPHA)?.0)
}

fn ulr_filter_detailed(
    ds: &MetricDataset,
    survivors: &[Metric],
    alpha: f64,
) -> Result<(Vec<Metric>, Vec<UlrEntry>), SelectionError> {
    let mut kept = Vec::new();
    let mut entries = Vec::new();
    for &m in survivors {
        let fit = ulr_fit(&ds.column(m)?, ds.labels())?;
        if !fit.zero_variance && fit.coef_p_value < alpha {
            kept.push(m);
        }
        entries.push(UlrEntry { metric: m, fit });
    }
    Metric::canonicalize(&mut kept);
    Ok((kept, entries))
}

/// Keeps survivors whose univariate logistic slope has `p < 0.05`.
pub fn stage2_ulr_filter(ds: &MetricDataset, survivors: &[Metric]) -> Result<Vec<Metric>, SelectionError> {
    Ok(ulr_filter_detailed(ds, survivors, ULR_ALPHA)?.0)
}

/// Connected components of the `|r| >= threshold` graph, each in canonical order.
pub fn correlated_components(matrix: &CorrelationMatrix, threshold: f64) -> Vec<Vec<Metric>> {
    let k = matrix.columns.len();
    let mut seen = vec![false; k];
    let mut components = Vec::new();
    for start in 0..k {
        if seen[start] {
            continue;
        }
        let mut stack = vec![start];
        let mut members = Vec::new();
        seen[start] = true;
        while let Some(i) = stack.pop() {
            members.push(matrix.columns[i]);
            for j in 0..k {
                if !seen[j] && i != j && matrix.r[i][j].abs() >= threshold {
                    seen[j] = true;
                    stack.push(j);
                }
            }
        }
        Metric::canonicalize(&mut members);
        components.push(members);
    }
    components.sort();
    components
}

/// Pooled-fold F-measure of a ridge logistic regression on `metrics`.
pub fn logistic_cv_f_measure(
    ds: &MetricDataset,
    metrics: &[Metric],
    folds: usize,
    seed: u64,
) -> Result<f64, SelectionError> {
    let x = ds.feature_matrix(metrics)?;
    let y = ds.labels();
    let plan = make_folds(y, folds.min(ds.n_rows()), seed).map_err(|_| SelectionError::TooFewRows {
        needed: folds,
        got: ds.n_rows(),
    })?;
    let mut confusion = Confusion::default();
    for f in 0..plan.k {
        let (train, test) = plan.split(f);
        let xtr = x.select_rows(&train);
        let ytr: Vec<u8> = train.iter().map(|&r| y[r]).collect();
        let yte: Vec<u8> = test.iter().map(|&r| y[r]).collect();
        let positives = ytr.iter().filter(|&&v| v == 1).count();
        let predicted: Vec<u8> = if positives == 0 || positives == ytr.len() {
            vec![u8::from(positives > 0); test.len()]
        } else {
            let (scaler, ztr) = Standardizer::fit_transform(&xtr);
            let fit = fit_logistic(&ztr, &ytr, 1e-6, 100);
            let zte = scaler.transform(&x.select_rows(&test));
            zte.row_iter()
                .map(|row| u8::from(fit.probability(row.iter().copied()) >= 0.5))
                .collect()
        };
        confusion += Confusion::from_predictions(&yte, &predicted);
    }
    Ok(confusion.f_measure())
}

fn correlation_prune_detailed(
    ds: &MetricDataset,
    survivors: &[Metric],
    cfg: &PfstConfig,
) -> Result<(Vec<Metric>, Option<CorrelationMatrix>, Vec<CorrelatedGroup>), SelectionError> {
    let mut survivors = survivors.to_vec();
    Metric::canonicalize(&mut survivors);
    if survivors.len() < 2 {
        return Ok((survivors, None, Vec::new()));
    }
    let cols: Vec<Vec<f64>> = survivors.iter().map(|&m| ds.column(m)).collect::<Result<_, _>>()?;
    let matrix = correlation_of_columns(&survivors, &cols);
    let mut kept = Vec::new();
    let mut groups = Vec::new();
    for component in correlated_components(&matrix, cfg.correlation_threshold) {
        if component.len() == 1 {
            kept.extend(component);
            continue;
        }
        let mut candidates: Vec<Vec<Metric>> = component.iter().map(|&m| vec![m]).collect();
        candidates.push(component.clone());
        let mut scored = Vec::new();
        for c in candidates {
            let f = logistic_cv_f_measure(ds, &c, cfg.cv_folds, cfg.seed)?;
            scored.push(CandidateScore {
                metrics: c,
                f_measure: f,
            });
        }
        // best F first; ties to fewer metrics, then canonical order
        let best = scored
            .iter()
            .min_by(|a, b| {
                b.f_measure
                    .total_cmp(&a.f_measure)
                    .then(a.metrics.len().cmp(&b.metrics.len()))
                    .then(a.metrics.cmp(&b.metrics))
            })
            .expect("component has candidates");
        let chosen = best.metrics.clone();
        kept.extend(chosen.iter().copied());
        groups.push(CorrelatedGroup {
            members: component,
            candidates: scored,
            chosen,
        });
    }
    Metric::canonicalize(&mut kept);
    Ok((kept, Some(matrix), groups))
}

/// Resolves strongly correlated groups to their best-performing candidate.
pub fn stage3_correlation_prune(
    ds: &MetricDataset,
    survivors: &[Metric],
    cfg: &PfstConfig,
) -> Result<Vec<Metric>, SelectionError> {
    Ok(correlation_prune_detailed(ds, survivors, cfg)?.0)
}

fn residual_ss(x: &DMatrix<f64>, y: &DVector<f64>) -> f64 {
    let design = with_intercept(x);
    let (beta, _) = lstsq(&design, y);
    (y - &design * beta).norm_squared()
}

fn stepwise_detailed(
    ds: &MetricDataset,
    survivors: &[Metric],
    p_enter: f64,
) -> Result<Vec<StepwiseStep>, SelectionError> {
    let mut remaining = survivors.to_vec();
    Metric::canonicalize(&mut remaining);
    let y = DVector::from_iterator(ds.n_rows(), ds.labels().iter().map(|&l| f64::from(l)));
    let n = ds.n_rows();
    let mean = y.mean();
    let mut rss = y.iter().map(|v| (v - mean).powi(2)).sum::<f64>();
    let mut selected: Vec<Metric> = Vec::new();
    let mut steps = Vec::new();

    while !remaining.is_empty() {
        let df_resid = n as i64 - selected.len() as i64 - 2;
        if df_resid < 1 {
            break;
        }
        let mut scores = Vec::with_capacity(remaining.len());
        let mut best: Option<(usize, f64, f64)> = None;
        for (idx, &c) in remaining.iter().enumerate() {
            let mut cols = selected.clone();
            cols.push(c);
            let x = ds.feature_matrix(&cols)?;
            let rss_new = residual_ss(&x, &y);
            let gain = rss - rss_new;
            let p = if gain <= 1e-12 * rss.max(1e-300) {
                1.0
            } else if rss_new <= 1e-15 * rss {
                0.0
            } else {
                let f = gain / (rss_new / df_resid as f64);
                let dist = FisherSnedecor::new(1.0, df_resid as f64).expect("valid degrees of freedom");
                dist.sf(f)
            };
            scores.push((c, p));
            if best.is_none_or(|(_, bp, _)| p < bp) {
                best = Some((idx, p, rss_new));
            }
        }
        let (idx, p, rss_new) = best.expect("non-empty candidates");
        if p < p_enter {
            let m = remaining.remove(idx);
            selected.push(m);
            rss = rss_new;
            steps.push(StepwiseStep {
                candidates: scores,
                admitted: Some(m),
            });
        } else {
            steps.push(StepwiseStep {
                candidates: scores,
                admitted: None,
            });
            break;
        }
    }
    Ok(steps)
}

/// Forward selection on a linear model of the label; admission order.
pub fn stage4_stepwise(ds: &MetricDataset, survivors: &[Metric], p_enter: f64) -> Result<Vec<Metric>, SelectionError> {
    Ok(stepwise_detailed(ds, survivors, p_enter)?
        .iter()
        .filter_map(|s| s.admitted)
        .collect())
}

/// Runs all four stages.
pub fn run_pfst(ds: &MetricDataset, cfg: &PfstConfig) -> Result<(FeatureSet, PfstTrace), SelectionError> {
    let mut all = ds.columns().to_vec();
    Metric::canonicalize(&mut all);
    let mut trace = PfstTrace {
        dataset_id: ds.id().to_string(),
        config: cfg.clone(),
        all_metrics: all.clone(),
        rank_tests: Vec::new(),
        stage1_survivors: Vec::new(),
        ulr: Vec::new(),
        stage2_survivors: Vec::new(),
        correlation: None,
        groups: Vec::new(),
        stage3_survivors: Vec::new(),
        stepwise: Vec::new(),
        stage4_selected: Vec::new(),
        warnings: Vec::new(),
        fallback: None,
    };

    let (s1, rank_tests) = rank_filter_detailed(ds, cfg.rank_alpha)?;
    trace.rank_tests = rank_tests;
    trace.stage1_survivors = s1.clone();
    if s1.is_empty() {
        let reason = "no metric passed the rank test";
        trace.warnings.push(reason.to_string());
        trace.fallback = Some("AM".to_string());
        return Ok((FeatureSet::fallback(FeatureSetLabel::Pfst, &all, reason), trace));
    }

    let (s2, ulr) = ulr_filter_detailed(ds, &s1, cfg.ulr_alpha)?;
    trace.ulr = ulr;
    trace.stage2_survivors = s2.clone();
    if s2.is_empty() {
        let reason = "no metric passed the univariate logistic filter";
        trace.warnings.push(reason.to_string());
        trace.fallback = Some("AM".to_string());
        return Ok((FeatureSet::fallback(FeatureSetLabel::Pfst, &all, reason), trace));
    }

    let (s3, correlation, groups) = correlation_prune_detailed(ds, &s2, cfg)?;
    trace.correlation = correlation;
    trace.groups = groups;
    trace.stage3_survivors = s3.clone();

    trace.stepwise = stepwise_detailed(ds, &s3, cfg.p_enter)?;
    let mut selected: Vec<Metric> = trace.stepwise.iter().filter_map(|s| s.admitted).collect();
    let mut provenance = vec!["stage4:stepwise".to_string(); selected.len()];
    let mut warnings = Vec::new();
    if selected.is_empty() {
        // smallest first-step entry p-value, canonical order on ties
        let best = trace
            .stepwise
            .first()
            .and_then(|step| {
                step.candidates
                    .iter()
                    .min_by(|a, b| a.1.total_cmp(&b.1).then(a.0.cmp(&b.0)))
                    .map(|&(m, _)| m)
            })
            .unwrap_or(s3[0]);
        let reason = format!("stepwise selection admitted nothing; using best stage-3 metric {best}");
        log::warn!("{}: {reason}", ds.id());
        trace.warnings.push(reason.clone());
        trace.fallback = Some("best-stage3".to_string());
        warnings.push(reason);
        selected.push(best);
        provenance.push("stage4:fallback".to_string());
    }
    trace.stage4_selected = selected.clone();
    debug_assert!(trace.is_monotone());
    let unique: BTreeSet<Metric> = selected.iter().copied().collect();
    debug_assert_eq!(unique.len(), selected.len());
    let fs = FeatureSet {
        label: FeatureSetLabel::Pfst,
        members: selected,
        provenance,
        fallback: false,
        warnings,
    };
    Ok((fs, trace))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataset::{synthesize, SynthSpec};

    #[test]
    fn constant_metric_is_dropped_at_stage1() {
        let labels: Vec<u8> = (0..20).map(|i| u8::from(i % 2 == 0)).collect();
        let mut data = DMatrix::zeros(20, 2);
        for i in 0..20 {
            data[(i, 0)] = 4.0;
            data[(i, 1)] = f64::from(labels[i]) * 10.0 + i as f64 * 0.1;
        }
        let ds = MetricDataset::new("c", "c", vec![Metric::Dit, Metric::Loc], data, labels).unwrap();
        let (s1, entries) = rank_filter_detailed(&ds, RANK_ALPHA).unwrap();
        assert_eq!(s1, vec![Metric::Loc]);
        assert_eq!(entries[0].test.p_value, 1.0);
    }

    #[test]
    fn every_informative_column_survives_stage1() {
        let ds = synthesize(&SynthSpec::new(
            200,
            vec![Metric::Dit, Metric::Cbo, Metric::Loc],
            vec![],
            2.0,
            5,
        ))
        .unwrap();
        assert_eq!(
            stage1_rank_filter(&ds).unwrap(),
            vec![Metric::Dit, Metric::Cbo, Metric::Loc]
        );
    }

    #[test]
    fn uncorrelated_survivors_pass_stage3_unchanged() {
        let ds = synthesize(&SynthSpec::new(
            200,
            vec![Metric::Dit, Metric::Cbo, Metric::Loc],
            vec![],
            1.0,
            2,
        ))
        .unwrap();
        let s = vec![Metric::Dit, Metric::Cbo, Metric::Loc];
        assert_eq!(stage3_correlation_prune(&ds, &s, &PfstConfig::default()).unwrap(), s);
    }

    #[test]
    fn empty_stepwise_input_admits_nothing() {
        let ds = synthesize(&SynthSpec::new(50, vec![Metric::Loc], vec![], 1.0, 2)).unwrap();
        assert!(stage4_stepwise(&ds, &[], 0.05).unwrap().is_empty());
    }

    #[test]
    fn selection_grid_has_one_row_per_metric() {
        let ds = synthesize(&SynthSpec::with_all_noise(150, vec![Metric::Loc], 2.0, 1)).unwrap();
        let (_, trace) = run_pfst(&ds, &PfstConfig::default()).unwrap();
        let mut buf = Vec::new();
        trace.write_selection_grid(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert_eq!(text.lines().count(), 22);
        assert!(text.contains("LOC,true,true,true,true"));
    }
}
