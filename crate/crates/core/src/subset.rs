//! Feature-subset selection: CFS, consistency, filtered CFS, rough-set
//! reducts, and a genetic algorithm over CFS merit.
//!
//! Subsets are bitmasks over the candidate list, bit `i` standing for the
//! `i`-th candidate in canonical metric order. Every objective is computed
//! from the subset alone, in a fixed summation order, so re-evaluating a
//! returned subset reproduces its merit bit for bit.

use std::collections::{BTreeMap, BTreeSet, HashMap};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::dataset::{Metric, MetricDataset};
use crate::feature_set::{FeatureSet, FeatureSetLabel, SelectionError};
use crate::pfst::stage1_rank_filter;
use crate::ranking::discretize;
use crate::stats::pearson;

/// Best-first search gives up after this many non-improving expansions.
pub const CFS_STALL_LIMIT: usize = 5;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SubsetSearchResult {
    pub label: FeatureSetLabel,
    pub members: Vec<Metric>,
    /// Objective value of exactly `members`.
    pub merit: f64,
    /// Number of distinct subsets scored.
    pub evaluations: usize,
    pub fallback: bool,
    pub warnings: Vec<String>,
}

impl SubsetSearchResult {
    pub fn feature_set(&self) -> FeatureSet {
        let stage = match self.label {
            FeatureSetLabel::Fs1 => "cfs",
            FeatureSetLabel::Fs2 => "consistency",
            FeatureSetLabel::Fs3 => "filtered-cfs",
            FeatureSetLabel::Fs4 => "rough-set",
            _ => "genetic",
        };
        let mut fs = FeatureSet::new(self.label, self.members.clone(), stage);
        if self.fallback {
            fs.provenance = vec!["fallback:AM".to_string(); fs.members.len()];
            fs.fallback = true;
        }
        fs.warnings = self.warnings.clone();
        fs
    }
}

fn sorted_candidates(ds: &MetricDataset) -> Vec<Metric> {
    let mut c = ds.columns().to_vec();
    Metric::canonicalize(&mut c);
    c
}

fn members_of(candidates: &[Metric], mask: u32) -> Vec<Metric> {
    candidates
        .iter()
        .enumerate()
        .filter(|(i, _)| mask >> i & 1 == 1)
        .map(|(_, &m)| m)
        .collect()
}

fn mask_of(candidates: &[Metric], members: &[Metric]) -> u32 {
    members
        .iter()
        .map(|m| 1u32 << candidates.iter().position(|c| c == m).expect("candidate"))
        .fold(0, |a, b| a | b)
}

/// Correlation-based merit `k·r̄cf / √(k + k(k−1)·r̄ff)` with absolute
/// Pearson correlations.
#[derive(Debug, Clone)]
pub struct CfsObjective {
    pub candidates: Vec<Metric>,
    r_cf: Vec<f64>,
    r_ff: Vec<Vec<f64>>,
}

impl CfsObjective {
    pub fn new(ds: &MetricDataset, candidates: &[Metric]) -> Result<Self, SelectionError> {
        if candidates.len() > 31 {
            return Err(SelectionError::TooFewCandidates {
                needed: 31,
                got: candidates.len(),
            });
        }
        let labels: Vec<f64> = ds.labels().iter().map(|&l| f64::from(l)).collect();
        let cols: Vec<Vec<f64>> = candidates.iter().map(|&m| ds.column(m)).collect::<Result<_, _>>()?;
        let r_cf = cols.iter().map(|c| pearson(c, &labels).unwrap_or(0.0).abs()).collect();
        let r_ff = cols
            .iter()
            .map(|a| cols.iter().map(|b| pearson(a, b).unwrap_or(0.0).abs()).collect())
            .collect();
        Ok(Self {
            candidates: candidates.to_vec(),
            r_cf,
            r_ff,
        })
    }

    /// Merit of a bitmask; the empty subset scores 0.
    pub fn merit(&self, mask: u32) -> f64 {
        let idx: Vec<usize> = (0..self.candidates.len()).filter(|i| mask >> i & 1 == 1).collect();
        let k = idx.len();
        if k == 0 {
            return 0.0;
        }
        let rcf = idx.iter().map(|&i| self.r_cf[i]).sum::<f64>() / k as f64;
        let rff = if k > 1 {
            let mut s = 0.0;
            for a in 0..k {
                for b in a + 1..k {
                    s += self.r_ff[idx[a]][idx[b]];
                }
            }
            s / (k * (k - 1) / 2) as f64
        } else {
            0.0
        };
        let kf = k as f64;
        kf * rcf / (kf + kf * (kf - 1.0) * rff).sqrt()
    }

    pub fn merit_of(&self, members: &[Metric]) -> f64 {
        self.merit(mask_of(&self.candidates, members))
    }
}

/// `(merit desc, fewer features, lower mask)` is better.
fn better(a: (f64, u32), b: (f64, u32)) -> bool {
    a.0 > b.0 || (a.0 == b.0 && (a.1.count_ones(), a.1) < (b.1.count_ones(), b.1))
}

/// Forward best-first search; returns `(best mask, best merit, evaluations)`.
fn best_first<F: FnMut(u32) -> f64>(n: usize, mut objective: F, stall_limit: usize) -> (u32, f64, usize) {
    let mut seen: HashMap<u32, f64> = HashMap::new();
    let mut eval = |mask: u32, seen: &mut HashMap<u32, f64>| *seen.entry(mask).or_insert_with(|| objective(mask));
    let start = eval(0, &mut seen);
    let mut open: Vec<(f64, u32)> = vec![(start, 0)];
    let mut closed: BTreeSet<u32> = BTreeSet::new();
    let mut best = (start, 0u32);
    let mut stall = 0;
    while stall < stall_limit {
        // pop the best open subset
        let Some(pos) = (0..open.len()).reduce(|a, b| if better(open[b], open[a]) { b } else { a }) else {
            break;
        };
        let (_, mask) = open.swap_remove(pos);
        closed.insert(mask);
        let mut improved = false;
        for i in 0..n {
            let child = mask | 1 << i;
            if child == mask || closed.contains(&child) || open.iter().any(|&(_, m)| m == child) {
                continue;
            }
            let m = eval(child, &mut seen);
            open.push((m, child));
            if better((m, child), best) {
                best = (m, child);
                improved = true;
            }
        }
        stall = if improved { 0 } else { stall + 1 };
    }
    (best.1, best.0, seen.len())
}

fn fallback_result(label: FeatureSetLabel, ds: &MetricDataset, merit: f64, evaluations: usize, reason: &str) -> SubsetSearchResult {
    log::warn!("{}: {label}: {reason}; falling back to all metrics", ds.id());
    SubsetSearchResult {
        label,
        members: ds.columns().to_vec(),
        merit,
        evaluations,
        fallback: true,
        warnings: vec![reason.to_string()],
    }
}

fn cfs_over(ds: &MetricDataset, candidates: &[Metric], label: FeatureSetLabel) -> Result<SubsetSearchResult, SelectionError> {
    let obj = CfsObjective::new(ds, candidates)?;
    let (mask, merit, evaluations) = best_first(candidates.len(), |m| obj.merit(m), CFS_STALL_LIMIT);
    if mask == 0 {
        let all = CfsObjective::new(ds, &sorted_candidates(ds))?;
        let am = all.merit_of(ds.columns());
        return Ok(fallback_result(label, ds, am, evaluations, "no subset has positive merit"));
    }
    Ok(SubsetSearchResult {
        label,
        members: members_of(candidates, mask),
        merit,
        evaluations,
        fallback: false,
        warnings: Vec::new(),
    })
}

/// FS1: best-first search maximizing CFS merit.
pub fn cfs_select(ds: &MetricDataset) -> Result<SubsetSearchResult, SelectionError> {
    cfs_over(ds, &sorted_candidates(ds), FeatureSetLabel::Fs1)
}

/// Discretized columns of the candidates, for the set-based objectives.
#[derive(Debug, Clone)]
pub struct BinnedData {
    pub candidates: Vec<Metric>,
    bins: Vec<Vec<usize>>,
    labels: Vec<u8>,
}

impl BinnedData {
    pub fn new(ds: &MetricDataset, candidates: &[Metric]) -> Result<Self, SelectionError> {
        let bins = candidates
            .iter()
            .map(|&m| ds.column(m).map(|c| discretize(&c)))
            .collect::<Result<_, _>>()?;
        Ok(Self {
            candidates: candidates.to_vec(),
            bins,
            labels: ds.labels().to_vec(),
        })
    }

    /// `[unchanged, changed]` counts per equivalence class of `mask`.
    fn classes(&self, mask: u32) -> BTreeMap<Vec<usize>, [usize; 2]> {
        let idx: Vec<usize> = (0..self.candidates.len()).filter(|i| mask >> i & 1 == 1).collect();
        let mut groups: BTreeMap<Vec<usize>, [usize; 2]> = BTreeMap::new();
        for (r, &l) in self.labels.iter().enumerate() {
            let key: Vec<usize> = idx.iter().map(|&i| self.bins[i][r]).collect();
            groups.entry(key).or_default()[usize::from(l == 1)] += 1;
        }
        groups
    }

    /// Rows not explained by their group's majority label.
    pub fn inconsistent_rows(&self, mask: u32) -> usize {
        self.classes(mask).values().map(|c| c[0].min(c[1])).sum()
    }

    pub fn consistency(&self, mask: u32) -> f64 {
        1.0 - self.inconsistent_rows(mask) as f64 / self.labels.len() as f64
    }

    /// Rows whose equivalence class is label-pure.
    pub fn positive_region(&self, mask: u32) -> usize {
        self.classes(mask)
            .values()
            .filter(|c| c[0] == 0 || c[1] == 0)
            .map(|c| c[0] + c[1])
            .sum()
    }

    pub fn dependency(&self, mask: u32) -> f64 {
        self.positive_region(mask) as f64 / self.labels.len() as f64
    }

    pub fn full_mask(&self) -> u32 {
        if self.candidates.is_empty() {
            0
        } else {
            u32::MAX >> (32 - self.candidates.len())
        }
    }
}

/// FS2: greedy forward search maximizing the consistency rate.
pub fn consistency_select(ds: &MetricDataset) -> Result<SubsetSearchResult, SelectionError> {
    let candidates = sorted_candidates(ds);
    let data = BinnedData::new(ds, &candidates)?;
    let target = data.inconsistent_rows(data.full_mask());
    let mut mask = 0u32;
    let mut current = data.inconsistent_rows(0);
    let mut evaluations = 1;
    while current > target {
        let mut best: Option<(usize, u32)> = None;
        for i in 0..candidates.len() {
            if mask >> i & 1 == 1 {
                continue;
            }
            let child = mask | 1 << i;
            let inc = data.inconsistent_rows(child);
            evaluations += 1;
            if best.is_none_or(|(b, _)| inc < b) {
                best = Some((inc, child));
            }
        }
        match best {
            Some((inc, child)) if inc < current => {
                mask = child;
                current = inc;
            }
            _ => break,
        }
    }
    if mask == 0 {
        return Ok(fallback_result(
            FeatureSetLabel::Fs2,
            ds,
            data.consistency(data.full_mask()),
            evaluations,
            "no metric improves consistency",
        ));
    }
    Ok(SubsetSearchResult {
        label: FeatureSetLabel::Fs2,
        members: members_of(&candidates, mask),
        merit: data.consistency(mask),
        evaluations,
        fallback: false,
        warnings: Vec::new(),
    })
}

/// FS3: rank-test filter, then CFS on the survivors.
pub fn filtered_subset_select(ds: &MetricDataset) -> Result<SubsetSearchResult, SelectionError> {
    let survivors = stage1_rank_filter(ds)?;
    if survivors.is_empty() {
        let all = CfsObjective::new(ds, &sorted_candidates(ds))?;
        return Ok(fallback_result(
            FeatureSetLabel::Fs3,
            ds,
            all.merit_of(ds.columns()),
            0,
            "no metric passed the rank-test pre-filter",
        ));
    }
    cfs_over(ds, &survivors, FeatureSetLabel::Fs3)
}

/// FS4: greedy forward reduct search on the dependency degree, then
/// backward pruning of redundant members.
pub fn rough_set_select(ds: &MetricDataset) -> Result<SubsetSearchResult, SelectionError> {
    let candidates = sorted_candidates(ds);
    let data = BinnedData::new(ds, &candidates)?;
    let target = data.positive_region(data.full_mask());
    let mut mask = 0u32;
    let mut admitted = Vec::new();
    let mut current = data.positive_region(0);
    let mut evaluations = 1;
    while current < target {
        let mut best: Option<(usize, usize)> = None;
        for i in 0..candidates.len() {
            if mask >> i & 1 == 1 {
                continue;
            }
            let pos = data.positive_region(mask | 1 << i);
            evaluations += 1;
            if best.is_none_or(|(b, _)| pos > b) {
                best = Some((pos, i));
            }
        }
        let (pos, i) = best.expect("target reachable with all candidates");
        mask |= 1 << i;
        admitted.push(i);
        current = pos;
    }
    // drop members whose removal keeps the dependency degree
    for &i in admitted.iter().rev() {
        let without = mask & !(1 << i);
        evaluations += 1;
        if without != 0 && data.positive_region(without) == target {
            mask = without;
        }
    }
    if mask == 0 {
        return Ok(fallback_result(
            FeatureSetLabel::Fs4,
            ds,
            data.dependency(data.full_mask()),
            evaluations,
            "empty reduct",
        ));
    }
    Ok(SubsetSearchResult {
        label: FeatureSetLabel::Fs4,
        members: members_of(&candidates, mask),
        merit: data.dependency(mask),
        evaluations,
        fallback: false,
        warnings: Vec::new(),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GaConfig {
    pub population: usize,
    pub generations: usize,
    pub crossover_rate: f64,
    /// `None` means `1 / n_candidates`.
    pub mutation_rate: Option<f64>,
    pub elitism: usize,
    pub tournament: usize,
    pub seed: u64,
}

impl Default for GaConfig {
    fn default() -> Self {
        Self {
            population: 50,
            generations: 100,
            crossover_rate: 0.6,
            mutation_rate: None,
            elitism: 2,
            tournament: 3,
            seed: 0,
        }
    }
}

/// Generic bitmask GA maximizing `fitness`; returns the best mask ever seen.
pub fn genetic_search<F: FnMut(u32) -> f64>(n: usize, mut fitness: F, cfg: &GaConfig) -> (u32, f64, usize) {
    if n == 0 {
        return (0, fitness(0), 1);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mutation = cfg.mutation_rate.unwrap_or(1.0 / n as f64);
    let mut cache: HashMap<u32, f64> = HashMap::new();
    let mut score = |m: u32, cache: &mut HashMap<u32, f64>| *cache.entry(m).or_insert_with(|| fitness(m));
    let pop_size = cfg.population.max(2);
    let mut population: Vec<u32> = (0..pop_size)
        .map(|_| (0..n).filter(|_| rng.random_bool(0.5)).fold(0u32, |m, i| m | 1 << i))
        .collect();
    let mut best = (f64::NEG_INFINITY, 0u32);
    for generation in 0..=cfg.generations {
        let mut scored: Vec<(f64, u32)> = population.iter().map(|&m| (score(m, &mut cache), m)).collect();
        for &s in &scored {
            if better(s, best) {
                best = s;
            }
        }
        if generation == cfg.generations {
            break;
        }
        scored.sort_by(|a, b| {
            if better(*a, *b) {
                std::cmp::Ordering::Less
            } else if better(*b, *a) {
                std::cmp::Ordering::Greater
            } else {
                std::cmp::Ordering::Equal
            }
        });
        let mut next: Vec<u32> = scored.iter().take(cfg.elitism.min(pop_size)).map(|s| s.1).collect();
        let tournament = |rng: &mut ChaCha8Rng| {
            let mut pick = scored[rng.random_range(0..scored.len())];
            for _ in 1..cfg.tournament.max(1) {
                let c = scored[rng.random_range(0..scored.len())];
                if better(c, pick) {
                    pick = c;
                }
            }
            pick.1
        };
        while next.len() < pop_size {
            let (mut a, mut b) = (tournament(&mut rng), tournament(&mut rng));
            if n > 1 && rng.random_bool(cfg.crossover_rate.clamp(0.0, 1.0)) {
                let point = rng.random_range(1..n);
                let low = (1u32 << point) - 1;
                let (na, nb) = ((a & low) | (b & !low), (b & low) | (a & !low));
                a = na;
                b = nb;
            }
            for child in [a, b] {
                let mut c = child;
                for i in 0..n {
                    if rng.random_bool(mutation.clamp(0.0, 1.0)) {
                        c ^= 1 << i;
                    }
                }
                if next.len() < pop_size {
                    next.push(c);
                }
            }
        }
        population = next;
    }
    (best.1, best.0, cache.len())
}

/// FS5: genetic search over CFS merit.
pub fn genetic_select(ds: &MetricDataset, cfg: &GaConfig) -> Result<SubsetSearchResult, SelectionError> {
    let candidates = sorted_candidates(ds);
    let obj = CfsObjective::new(ds, &candidates)?;
    let (mask, merit, evaluations) = genetic_search(candidates.len(), |m| obj.merit(m), cfg);
    if mask == 0 {
        return Ok(fallback_result(
            FeatureSetLabel::Fs5,
            ds,
            obj.merit(obj_full(&candidates)),
            evaluations,
            "best chromosome is empty",
        ));
    }
    Ok(SubsetSearchResult {
        label: FeatureSetLabel::Fs5,
        members: members_of(&candidates, mask),
        merit,
        evaluations,
        fallback: false,
        warnings: Vec::new(),
    })
}

fn obj_full(candidates: &[Metric]) -> u32 {
    if candidates.is_empty() {
        0
    } else {
        u32::MAX >> (32 - candidates.len())
    }
}

/// Maximum of `objective` over all non-empty subsets of `n` candidates.
pub fn exhaustive_best<F: FnMut(u32) -> f64>(n: usize, mut objective: F) -> (u32, f64) {
    let mut best = (f64::NEG_INFINITY, 0);
    for mask in 1..(1u32 << n) {
        let v = objective(mask);
        if better((v, mask), best) {
            best = (v, mask);
        }
    }
    (best.1, best.0)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataset::{synthesize, SynthSpec};
    use nalgebra::DMatrix;

    fn dataset(cols: Vec<Metric>, data: DMatrix<f64>, labels: Vec<u8>) -> MetricDataset {
        MetricDataset::new("t", "t", cols, data, labels).unwrap()
    }

    #[test]
    fn single_feature_merit_is_its_correlation() {
        let labels = vec![0, 0, 1, 1];
        let x = [0.0, 1.0, 0.0, 1.0];
        let y: Vec<f64> = labels.iter().map(|&l| f64::from(l)).collect();
        let r = pearson(&x, &y).unwrap().abs();
        let ds = dataset(vec![Metric::Loc], DMatrix::from_column_slice(4, 1, &x), labels);
        let obj = CfsObjective::new(&ds, &[Metric::Loc]).unwrap();
        assert_eq!(obj.merit(1), r);
    }

    #[test]
    fn duplicate_feature_never_raises_merit() {
        let ds = synthesize(&SynthSpec::new(100, vec![Metric::Loc], vec![Metric::Dit], 1.0, 3)).unwrap();
        let mut data = ds.data().clone().insert_column(2, 0.0);
        let loc = ds.column(Metric::Loc).unwrap();
        for (i, v) in loc.iter().enumerate() {
            data[(i, 2)] = *v;
        }
        let dup = dataset(vec![Metric::Dit, Metric::Loc, Metric::SlocP], data, ds.labels().to_vec());
        let cands = [Metric::Dit, Metric::Loc, Metric::SlocP];
        let obj = CfsObjective::new(&dup, &cands).unwrap();
        assert!(obj.merit(0b110) <= obj.merit(0b010));
    }

    #[test]
    fn empty_set_consistency_is_the_majority_rate() {
        let labels: Vec<u8> = (0..10).map(|i| u8::from(i < 4)).collect();
        let ds = dataset(vec![Metric::Loc], DMatrix::from_fn(10, 1, |i, _| i as f64), labels);
        let data = BinnedData::new(&ds, &[Metric::Loc]).unwrap();
        assert_eq!(data.consistency(0), 0.6);
        assert_eq!(data.consistency(1), 1.0);
        assert_eq!(data.dependency(0), 0.0);
        assert_eq!(data.dependency(1), 1.0);
    }

    #[test]
    fn reduct_of_label_copy_is_that_feature() {
        let labels: Vec<u8> = (0..20).map(|i| u8::from(i % 2 == 0)).collect();
        let mut data = DMatrix::zeros(20, 2);
        for i in 0..20 {
            data[(i, 0)] = ((i * 7) % 5) as f64;
            data[(i, 1)] = f64::from(labels[i]);
        }
        let ds = dataset(vec![Metric::Dit, Metric::Noc], data, labels);
        let r = rough_set_select(&ds).unwrap();
        assert_eq!(r.members, vec![Metric::Noc]);
        assert_eq!(r.merit, 1.0);
    }

    #[test]
    fn empty_chromosome_has_zero_fitness() {
        let ds = synthesize(&SynthSpec::new(50, vec![Metric::Loc], vec![Metric::Dit], 1.0, 3)).unwrap();
        let obj = CfsObjective::new(&ds, &[Metric::Dit, Metric::Loc]).unwrap();
        assert_eq!(obj.merit(0), 0.0);
    }

    #[test]
    fn ga_is_seeded() {
        let ds = synthesize(&SynthSpec::new(80, vec![Metric::Loc, Metric::Cbo], vec![Metric::Dit, Metric::Noc], 1.0, 3)).unwrap();
        let cfg = GaConfig {
            seed: 9,
            generations: 10,
            ..GaConfig::default()
        };
        assert_eq!(genetic_select(&ds, &cfg).unwrap(), genetic_select(&ds, &cfg).unwrap());
    }
}
