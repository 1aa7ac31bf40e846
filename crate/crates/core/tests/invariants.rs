use changeprone::dataset::{Metric, MetricDataset};
use changeprone::ensembles::{ceil_sqrt, majority_vote};
use changeprone::harness::{make_folds, Confusion};
use changeprone::stats::{midranks, pearson, rank_test, signed_rank_test};
use changeprone::subset::{BinnedData, CfsObjective};
use nalgebra::DMatrix;
use proptest::prelude::*;

fn labels_with_both() -> impl Strategy<Value = Vec<u8>> {
    prop::collection::vec(0u8..=1, 4..120).prop_filter("both classes", |l| l.contains(&0) && l.contains(&1))
}

fn small_dataset() -> impl Strategy<Value = MetricDataset> {
    (labels_with_both(), 2usize..=6).prop_flat_map(|(labels, d)| {
        let n = labels.len();
        prop::collection::vec(-5.0f64..5.0, n * d).prop_map(move |v| {
            let data = DMatrix::from_vec(n, d, v);
            MetricDataset::new("p", "p", Metric::ALL[..d].to_vec(), data, labels.clone()).unwrap()
        })
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(1000))]

    #[test]
    fn folds_partition_rows(labels in labels_with_both(), k in 2usize..=10, seed in any::<u64>()) {
        prop_assume!(k <= labels.len());
        let plan = make_folds(&labels, k, seed).unwrap();
        let sizes = plan.fold_sizes();
        prop_assert_eq!(sizes.iter().sum::<usize>(), labels.len());
        prop_assert!(sizes.iter().max().unwrap() - sizes.iter().min().unwrap() <= 1);
        let mut pos = vec![0usize; k];
        for (row, &f) in plan.assignments.iter().enumerate() {
            prop_assert!(f < k);
            pos[f] += usize::from(labels[row] == 1);
        }
        prop_assert!(pos.iter().max().unwrap() - pos.iter().min().unwrap() <= 1);
        let mut seen = vec![0; labels.len()];
        for f in 0..k {
            let (train, test) = plan.split(f);
            prop_assert_eq!(train.len() + test.len(), labels.len());
            for r in test { seen[r] += 1; }
        }
        prop_assert!(seen.iter().all(|&c| c == 1));
    }
}

proptest! {
    #[test]
    fn confusion_counts_add_up(pairs in prop::collection::vec((0u8..=1, 0u8..=1), 1..200)) {
        let (truth, pred): (Vec<u8>, Vec<u8>) = pairs.iter().copied().unzip();
        let c = Confusion::from_predictions(&truth, &pred);
        prop_assert_eq!(c.total(), truth.len());
        let correct = pairs.iter().filter(|(a, b)| a == b).count();
        prop_assert_eq!(c.accuracy(), 100.0 * correct as f64 / truth.len() as f64);
        let f = c.f_measure();
        prop_assert!((0.0..=1.0).contains(&f));
        if c.tp > 0 {
            let expected = 2.0 * c.tp as f64 / (2 * c.tp + c.fp + c.fn_) as f64;
            prop_assert!((f - expected).abs() < 1e-12);
        }
    }

    #[test]
    fn majority_vote_breaks_ties_toward_changed(votes in prop::collection::vec(prop::collection::vec(0u8..=1, 8), 1..10)) {
        let out = majority_vote(&votes);
        for (i, &o) in out.iter().enumerate() {
            let ones = votes.iter().filter(|v| v[i] == 1).count();
            let zeros = votes.len() - ones;
            prop_assert_eq!(o, u8::from(ones >= zeros));
        }
    }

    #[test]
    fn ceil_sqrt_is_the_smallest_root(n in 0usize..1_000_000) {
        let k = ceil_sqrt(n);
        prop_assert!(k * k >= n);
        prop_assert!(k == 0 || (k - 1) * (k - 1) < n);
    }

    #[test]
    fn midranks_sum_to_the_triangular_number(v in prop::collection::vec(prop::sample::select(vec![0.0, 1.0, 2.0, 2.5, 7.0]), 1..60)) {
        let r = midranks(&v);
        let n = v.len() as f64;
        prop_assert!((r.iter().sum::<f64>() - n * (n + 1.0) / 2.0).abs() < 1e-9);
        for i in 0..v.len() {
            for j in 0..v.len() {
                if v[i] < v[j] { prop_assert!(r[i] < r[j]); }
                if v[i] == v[j] { prop_assert_eq!(r[i], r[j]); }
            }
        }
    }

    #[test]
    fn signed_rank_p_is_a_probability_and_sign_symmetric(d in prop::collection::vec(-10.0f64..10.0, 0..40)) {
        let a = signed_rank_test(&d);
        let neg: Vec<f64> = d.iter().map(|x| -x).collect();
        let b = signed_rank_test(&neg);
        prop_assert!((0.0..=1.0).contains(&a.p_value));
        prop_assert!((a.p_value - b.p_value).abs() < 1e-12);
    }

    #[test]
    fn rank_test_is_symmetric_in_its_groups(
        a in prop::collection::vec(-3.0f64..3.0, 1..30),
        b in prop::collection::vec(-3.0f64..3.0, 1..30),
    ) {
        let p = rank_test(&a, &b).unwrap().p_value;
        let q = rank_test(&b, &a).unwrap().p_value;
        prop_assert!((0.0..=1.0).contains(&p));
        prop_assert!((p - q).abs() < 1e-12);
    }

    #[test]
    fn pearson_is_bounded_and_symmetric(
        xy in prop::collection::vec((-100.0f64..100.0, -100.0f64..100.0), 2..50),
    ) {
        let (x, y): (Vec<f64>, Vec<f64>) = xy.into_iter().unzip();
        if let Some(r) = pearson(&x, &y) {
            prop_assert!(r.abs() <= 1.0 + 1e-12);
            prop_assert!((r - pearson(&y, &x).unwrap()).abs() < 1e-12);
        }
    }

    #[test]
    fn cfs_merit_matches_its_formula(ds in small_dataset(), mask in 1u32..64) {
        let cols = ds.columns().to_vec();
        prop_assume!(mask < 1 << cols.len());
        prop_assume!(ds.constant_columns().is_empty());
        let obj = CfsObjective::new(&ds, &cols).unwrap();
        let members: Vec<Metric> = (0..cols.len()).filter(|i| mask >> i & 1 == 1).map(|i| cols[i]).collect();
        let y: Vec<f64> = ds.labels().iter().map(|&l| f64::from(l)).collect();
        let k = members.len() as f64;
        let rcf = members.iter().map(|&m| pearson(&ds.column(m).unwrap(), &y).unwrap_or(0.0).abs()).sum::<f64>() / k;
        let mut rff = 0.0;
        let mut pairs = 0.0;
        for i in 0..members.len() {
            for j in i + 1..members.len() {
                rff += pearson(&ds.column(members[i]).unwrap(), &ds.column(members[j]).unwrap()).unwrap_or(0.0).abs();
                pairs += 1.0;
            }
        }
        let rff = if pairs > 0.0 { rff / pairs } else { 0.0 };
        let oracle = k * rcf / (k + k * (k - 1.0) * rff).sqrt();
        prop_assert!((obj.merit(mask) - oracle).abs() < 1e-9, "{} vs {}", obj.merit(mask), oracle);
        prop_assert_eq!(obj.merit(mask), obj.merit_of(&members));
    }

    #[test]
    fn adding_features_never_lowers_consistency(ds in small_dataset(), a in 0u32..64, b in 0u32..64) {
        let bins = BinnedData::new(&ds, ds.columns()).unwrap();
        let full = bins.full_mask();
        let (a, b) = (a & full, b & full);
        prop_assert!(bins.consistency(a | b) >= bins.consistency(a));
        prop_assert!(bins.dependency(a | b) >= bins.dependency(a));
        prop_assert!(bins.inconsistent_rows(a | b) <= bins.inconsistent_rows(a));
    }
}
