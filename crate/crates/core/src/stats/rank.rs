use serde::{Deserialize, Serialize};
use statrs::function::erf::erfc;

use super::StatsError;

/// Significance level for the changed/unchanged rank filter (`p <= 0.05`).
pub const RANK_ALPHA: f64 = 0.05;

/// Below this smaller-group size the rank-sum p-value is exact.
pub const RANK_SUM_EXACT_BELOW: usize = 8;

/// Up to this many non-zero differences the signed-rank p-value is exact.
pub const SIGNED_RANK_EXACT_MAX: usize = 25;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum PValueMethod {
    Exact,
    NormalApprox,
}

/// Outcome of the two-sample rank-sum (Mann-Whitney) test.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RankTestResult {
    /// Mann-Whitney U of the first (changed) group.
    pub statistic: f64,
    pub p_value: f64,
    /// `p_value <= 0.05`.
    pub significant: bool,
    pub method: PValueMethod,
}

/// Outcome of the paired signed-rank test.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SignedRankResult {
    /// Sum of ranks of the positive differences.
    pub statistic: f64,
    pub p_value: f64,
    /// Differences left after dropping zeros.
    pub n_nonzero: usize,
    pub method: PValueMethod,
}

/// 1-based ranks with ties assigned the mean of the positions they span.
pub fn midranks(values: &[f64]) -> Vec<f64> {
    let mut order: Vec<usize> = (0..values.len()).collect();
    order.sort_by(|&a, &b| values[a].total_cmp(&values[b]));
    let mut ranks = vec![0.0; values.len()];
    let mut i = 0;
    while i < order.len() {
        let mut j = i + 1;
        while j < order.len() && values[order[j]] == values[order[i]] {
            j += 1;
        }
        // positions i+1 ..= j share the average rank
        let avg = (i + 1 + j) as f64 / 2.0;
        for &k in &order[i..j] {
            ranks[k] = avg;
        }
        i = j;
    }
    ranks
}

/// Sizes of runs of tied values.
fn tie_groups(values: &[f64]) -> Vec<usize> {
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    let mut groups = Vec::new();
    let mut i = 0;
    while i < sorted.len() {
        let mut j = i + 1;
        while j < sorted.len() && sorted[j] == sorted[i] {
            j += 1;
        }
        groups.push(j - i);
        i = j;
    }
    groups
}

/// Two-sided p from tail counts: `min(1, 2 * min(P(S <= s), P(S >= s)))`.
fn two_sided_from_counts(le: u128, ge: u128, total: u128) -> f64 {
    let tail = le.min(ge) as f64 / total as f64;
    (2.0 * tail).min(1.0)
}

/// Doubled mid-ranks are integers, which keeps the exact distributions in
/// integer arithmetic.
fn doubled(ranks: &[f64]) -> Vec<usize> {
    ranks.iter().map(|r| (2.0 * r).round() as usize).collect()
}

/// Counts, for every achievable sum, the `k`-subsets of `items` with that sum.
fn subset_sum_counts(items: &[usize], k: usize) -> Vec<u128> {
    let mut top: Vec<usize> = items.to_vec();
    top.sort_unstable_by(|a, b| b.cmp(a));
    let max_sum: usize = top.iter().take(k).sum();
    // counts[c][s]: ways to choose c items summing to s
    let mut counts = vec![vec![0u128; max_sum + 1]; k + 1];
    counts[0][0] = 1;
    for (seen, &item) in items.iter().enumerate() {
        for c in (1..=k.min(seen + 1)).rev() {
            let (lower, upper) = counts.split_at_mut(c);
            let prev = &lower[c - 1];
            let cur = &mut upper[0];
            for s in (item..=max_sum).rev() {
                let add = prev[s - item];
                if add != 0 {
                    cur[s] += add;
                }
            }
        }
    }
    counts.swap_remove(k)
}

/// Two-sided Wilcoxon rank-sum (Mann-Whitney) test of `changed` vs `unchanged`.
///
/// Ties receive mid-ranks. When the smaller group has fewer than
/// [`RANK_SUM_EXACT_BELOW`] members the p-value comes from the exact
/// permutation distribution of the rank sum (tie-aware); otherwise from the
/// normal approximation with tie and continuity corrections.
pub fn rank_test(changed: &[f64], unchanged: &[f64]) -> Result<RankTestResult, StatsError> {
    if changed.is_empty() || unchanged.is_empty() {
        return Err(StatsError::EmptyGroup);
    }
    let n1 = changed.len();
    let n2 = unchanged.len();
    let pooled: Vec<f64> = changed.iter().chain(unchanged).copied().collect();
    let ranks = midranks(&pooled);
    let r1: f64 = ranks[..n1].iter().sum();
    let u1 = r1 - (n1 * (n1 + 1)) as f64 / 2.0;

    let (p_value, method) = if n1.min(n2) < RANK_SUM_EXACT_BELOW {
        let d = doubled(&ranks);
        let (group, k) = if n1 <= n2 { (&d[..n1], n1) } else { (&d[n1..], n2) };
        let observed: usize = group.iter().sum();
        let counts = subset_sum_counts(&d, k);
        let total: u128 = counts.iter().sum();
        let le: u128 = counts[..=observed.min(counts.len() - 1)].iter().sum();
        let ge: u128 = counts.get(observed..).map_or(0, |c| c.iter().sum());
        (two_sided_from_counts(le, ge, total), PValueMethod::Exact)
    } else {
        let n = (n1 + n2) as f64;
        let tie_term: f64 = tie_groups(&pooled)
            .into_iter()
            .map(|t| {
                let t = t as f64;
                t * t * t - t
            })
            .sum();
        let (a, b) = (n1 as f64, n2 as f64);
        let var = a * b / 12.0 * ((n + 1.0) - tie_term / (n * (n - 1.0)));
        let p = if var <= 0.0 {
            1.0
        } else {
            let z = ((u1 - a * b / 2.0).abs() - 0.5).max(0.0) / var.sqrt();
            erfc(z / std::f64::consts::SQRT_2).min(1.0)
        };
        (p, PValueMethod::NormalApprox)
    };

    Ok(RankTestResult {
        statistic: u1,
        p_value,
        significant: p_value <= RANK_ALPHA,
        method,
    })
}

/// Two-sided Wilcoxon signed-rank test on paired differences.
///
/// Zero differences are dropped; ties among `|d|` get mid-ranks. Exact
/// (tie-aware) when at most [`SIGNED_RANK_EXACT_MAX`] differences remain,
/// normal approximation with tie and continuity corrections otherwise. No
/// remaining differences gives `p = 1`.
pub fn signed_rank_test(diffs: &[f64]) -> SignedRankResult {
    let nz: Vec<f64> = diffs.iter().copied().filter(|&d| d != 0.0).collect();
    let n = nz.len();
    if n == 0 {
        return SignedRankResult {
            statistic: 0.0,
            p_value: 1.0,
            n_nonzero: 0,
            method: PValueMethod::Exact,
        };
    }
    let abs: Vec<f64> = nz.iter().map(|d| d.abs()).collect();
    let ranks = midranks(&abs);
    let w_plus: f64 = nz
        .iter()
        .zip(&ranks)
        .filter(|(d, _)| **d > 0.0)
        .map(|(_, r)| r)
        .sum();

    if n <= SIGNED_RANK_EXACT_MAX {
        let d = doubled(&ranks);
        let max_sum: usize = d.iter().sum();
        let mut counts = vec![0u128; max_sum + 1];
        counts[0] = 1;
        for &item in &d {
            for s in (item..=max_sum).rev() {
                counts[s] += counts[s - item];
            }
        }
        let observed = (2.0 * w_plus).round() as usize;
        let total: u128 = counts.iter().sum();
        let le: u128 = counts[..=observed].iter().sum();
        let ge: u128 = counts[observed..].iter().sum();
        SignedRankResult {
            statistic: w_plus,
            p_value: two_sided_from_counts(le, ge, total),
            n_nonzero: n,
            method: PValueMethod::Exact,
        }
    } else {
        let nf = n as f64;
        let mean = nf * (nf + 1.0) / 4.0;
        let tie_term: f64 = tie_groups(&abs)
            .into_iter()
            .map(|t| {
                let t = t as f64;
                t * t * t - t
            })
            .sum();
        let var = nf * (nf + 1.0) * (2.0 * nf + 1.0) / 24.0 - tie_term / 48.0;
        let p = if var <= 0.0 {
            1.0
        } else {
            let z = ((w_plus - mean).abs() - 0.5).max(0.0) / var.sqrt();
            erfc(z / std::f64::consts::SQRT_2).min(1.0)
        };
        SignedRankResult {
            statistic: w_plus,
            p_value: p,
            n_nonzero: n,
            method: PValueMethod::NormalApprox,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn midranks_average_ties() {
        assert_eq!(midranks(&[1., 2., 2., 4., 5.]), vec![1., 2.5, 2.5, 4., 5.]);
        assert_eq!(midranks(&[3., 3., 3.]), vec![2., 2., 2.]);
    }

    #[test]
    fn fully_separated_triplets() {
        // 20 equally likely assignments; {1,2,3} is the unique minimum.
        let r = rank_test(&[1., 2., 3.], &[4., 5., 6.]).unwrap();
        assert_eq!(r.method, PValueMethod::Exact);
        assert!((r.p_value - 0.10).abs() < 1e-15);
        assert_eq!(r.statistic, 0.0);
        assert!(!r.significant);
    }

    #[test]
    fn identical_groups_give_p_one() {
        let r = rank_test(&[5., 5.], &[5., 5.]).unwrap();
        assert_eq!(r.p_value, 1.0);
        let big = vec![2.0; 20];
        let r = rank_test(&big, &big).unwrap();
        assert_eq!(r.method, PValueMethod::NormalApprox);
        assert_eq!(r.p_value, 1.0);
    }

    #[test]
    fn empty_group_is_an_error() {
        assert!(matches!(rank_test(&[], &[1.0]), Err(StatsError::EmptyGroup)));
    }

    #[test]
    fn normal_path_matches_reference_value() {
        // x = 0..10, y = 5..15: U = 12.5 against a null mean of 50
        let x: Vec<f64> = (0..10).map(f64::from).collect();
        let y: Vec<f64> = (5..15).map(f64::from).collect();
        let r = rank_test(&x, &y).unwrap();
        assert_eq!(r.statistic, 12.5);
        // ties: values 5..9 appear twice -> 5 groups of 2, tie term 5*6 = 30
        let var: f64 = 100.0 / 12.0 * (21.0 - 30.0 / (20.0 * 19.0));
        let z = 37.0 / var.sqrt();
        let expected = erfc(z / std::f64::consts::SQRT_2);
        assert!((r.p_value - expected).abs() < 1e-15);
        // independent reference implementation, asymptotic with continuity correction
        assert!((r.p_value - 0.005_075_392_315_273_923).abs() < 1e-12);
    }

    #[test]
    fn signed_rank_all_positive_small() {
        // n = 4 distinct ranks: P(W+ = 10) = 1/16, two-sided 1/8
        let r = signed_rank_test(&[1., 2., 3., 4.]);
        assert_eq!(r.statistic, 10.0);
        assert!((r.p_value - 0.125).abs() < 1e-15);
    }

    #[test]
    fn signed_rank_zero_diffs() {
        let r = signed_rank_test(&[0.0; 5]);
        assert_eq!(r.p_value, 1.0);
        assert_eq!(r.n_nonzero, 0);
    }
}
