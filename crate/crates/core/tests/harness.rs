use changeprone::classifiers::ClassifierKind;
use changeprone::dataset::{synthesize, Metric, MetricDataset, SynthSpec};
use changeprone::feature_set::{FeatureSet, FeatureSetLabel};
use changeprone::harness::{
    all_comparisons, compare, emit_reports, evaluate_cell, load_results, make_folds, run_grid, Axis, Confusion,
    ExperimentConfig, ExperimentGrid, GridOptions, HarnessError, Measure, RunMeta, SUMMARY_HEADER,
};
use nalgebra::DMatrix;

const FAST: [ClassifierKind; 4] = [
    ClassifierKind::Linr,
    ClassifierKind::Logr,
    ClassifierKind::Dt,
    ClassifierKind::Mve,
];

fn synth(id: &str, seed: u64) -> MetricDataset {
    synthesize(&SynthSpec::with_all_noise(80, vec![Metric::Cbo, Metric::Loc], 2.0, seed))
        .unwrap()
        .with_identity(id, id)
}

fn options(seed: u64) -> GridOptions {
    let mut o = GridOptions::new(seed);
    o.feature_sets = vec![FeatureSetLabel::Am, FeatureSetLabel::Fr1, FeatureSetLabel::Pfst];
    o.classifiers = FAST.to_vec();
    o
}

fn read(path: &std::path::Path) -> String {
    std::fs::read_to_string(path).unwrap()
}

#[test]
fn perfect_predictor_scores_full_marks() {
    let labels: Vec<u8> = (0..50).map(|i| (i % 2) as u8).collect();
    let data = DMatrix::from_fn(50, 2, |i, j| if j == 0 { labels[i] as f64 } else { (i * 7 % 11) as f64 });
    let ds = MetricDataset::new("p", "p", vec![Metric::Loc, Metric::Dit], data, labels.clone()).unwrap();
    let fs = FeatureSet::new(FeatureSetLabel::Am, vec![Metric::Loc], "test");
    let folds = make_folds(&labels, 5, 1).unwrap();
    let r = evaluate_cell(&ds, &fs, ClassifierKind::Dt, &folds, &ExperimentConfig::default(), 1).unwrap();
    assert_eq!(r.accuracy, 100.0);
    assert_eq!(r.f_measure, 1.0);
    assert_eq!(r.per_fold.len(), 5);
}

#[test]
fn sixty_forty_split_puts_twelve_positives_in_every_fold() {
    let labels: Vec<u8> = (0..100).map(|i| u8::from(i < 60)).collect();
    let plan = make_folds(&labels, 5, 9).unwrap();
    for f in 0..5 {
        let (_, test) = plan.split(f);
        assert_eq!(test.iter().filter(|&&i| labels[i] == 1).count(), 12);
    }
}

#[test]
fn evaluate_cell_rejects_mismatched_inputs() {
    let ds = synth("a", 1);
    let other = make_folds(&vec![0, 1, 0, 1, 0, 1], 2, 0).unwrap();
    let fs = FeatureSet::all_metrics(ds.columns());
    let cfg = ExperimentConfig::default();
    assert!(matches!(
        evaluate_cell(&ds, &fs, ClassifierKind::Linr, &other, &cfg, 0),
        Err(HarnessError::FoldMismatch { .. })
    ));
}

#[test]
fn grid_has_every_cell_once_and_consistent_measures() {
    let datasets = [synth("a", 1), synth("b", 2)];
    let grid = run_grid(&datasets, &options(5)).unwrap();
    assert_eq!(grid.expected_cells(), 2 * 3 * 4);
    assert!(grid.is_complete());
    assert!(!grid.has_duplicate_cells());
    for r in &grid.records {
        assert_eq!(r.accuracy, r.confusion.accuracy());
        assert_eq!(r.f_measure, r.confusion.f_measure());
        assert_eq!(r.confusion.total(), 80);
        let pooled = r.per_fold.len();
        assert_eq!(pooled, 5);
    }
    assert_eq!(grid.selections.len(), 2);
}

#[test]
fn grid_rejects_empty_and_duplicate_inputs() {
    assert!(matches!(run_grid(&[], &options(0)), Err(HarnessError::NoDatasets)));
    assert!(matches!(
        run_grid(&[synth("a", 1), synth("a", 2)], &options(0)),
        Err(HarnessError::DuplicateDataset(_))
    ));
}

#[test]
fn cached_cells_reproduce_the_grid() {
    let dir = tempfile::tempdir().unwrap();
    let datasets = [synth("a", 3)];
    let mut opts = options(11);
    opts.cache_dir = Some(dir.path().join("cache"));
    let first = run_grid(&datasets, &opts).unwrap();
    assert!(std::fs::read_dir(dir.path().join("cache")).unwrap().count() >= 12);
    let second = run_grid(&datasets, &opts).unwrap();
    assert_eq!(first, second);
    opts.cache_dir = None;
    assert_eq!(run_grid(&datasets, &opts).unwrap(), first);
}

#[test]
fn failing_cells_do_not_stop_the_grid() {
    let mut opts = options(2);
    opts.classifiers = vec![ClassifierKind::Linr, ClassifierKind::SvmLin];
    opts.config.classifier.svm_c = -1.0;
    let grid = run_grid(&[synth("a", 4)], &opts).unwrap();
    assert_eq!(grid.records.len(), 3);
    assert_eq!(grid.failures.len(), 3);
    assert!(grid.records.iter().all(|r| r.classifier == ClassifierKind::Linr));
    assert!(grid.failures.iter().all(|f| f.classifier == ClassifierKind::SvmLin));
    assert!(!grid.is_complete());
}

#[test]
fn nested_selection_runs() {
    let mut opts = options(8);
    opts.config.nested = true;
    opts.classifiers = vec![ClassifierKind::Logr];
    let grid = run_grid(&[synth("a", 6)], &opts).unwrap();
    assert!(grid.is_complete());
    assert!(grid.records.iter().all(|r| r.accuracy > 60.0));
}

#[test]
fn identical_methods_are_indistinguishable() {
    let grid = run_grid(&[synth("a", 1), synth("b", 2)], &options(3)).unwrap();
    let mut copy: ExperimentGrid = grid.clone();
    copy.classifiers = vec![ClassifierKind::Linr, ClassifierKind::Polyr];
    copy.records = grid
        .records
        .iter()
        .filter(|r| r.classifier == ClassifierKind::Linr)
        .flat_map(|r| {
            let mut twin = r.clone();
            twin.classifier = ClassifierKind::Polyr;
            [r.clone(), twin]
        })
        .collect();
    for m in Measure::BOTH {
        let rep = compare(&copy, Axis::Classifiers, m).unwrap();
        assert_eq!(rep.p_values[0][1], 1.0);
        assert_eq!(rep.mean_difference[0][1], 0.0);
        assert_eq!(rep.significant_pairs, 0);
    }
}

#[test]
fn comparisons_cover_both_axes_and_measures() {
    let grid = run_grid(&[synth("a", 1), synth("b", 2)], &options(3)).unwrap();
    let all = all_comparisons(&grid);
    assert_eq!(all.len(), 4);
    for c in &all {
        let r = c.report.as_ref().unwrap();
        let m = r.methods.len();
        assert_eq!(m, if c.axis == Axis::Classifiers { 4 } else { 3 });
        assert_eq!(r.n_pairs, m * (m - 1) / 2);
        assert_eq!(r.n_observations, if c.axis == Axis::Classifiers { 6 } else { 8 });
        for i in 0..m {
            assert_eq!(r.mean_difference[i][i], 0.0);
            for j in 0..m {
                assert_eq!(r.mean_difference[i][j], -r.mean_difference[j][i]);
                assert_eq!(r.p_values[i][j], r.p_values[j][i]);
            }
        }
    }
}

#[test]
fn reports_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = ExperimentConfig::default();
    let grid = run_grid(&[synth("a", 1)], &options(4)).unwrap();
    let comparisons = all_comparisons(&grid);
    let meta = RunMeta::new(&cfg, 4);
    let written = emit_reports(&grid, &comparisons, dir.path(), &meta).unwrap();
    assert!(written.iter().any(|p| p.ends_with("pfst_trace_a.json")));
    assert!(written.iter().any(|p| p.ends_with("pfst_selection_a.csv")));
    let table = read(&dir.path().join("table_classifiers.csv"));
    let mut lines = table.lines();
    assert_eq!(lines.next().unwrap(), format!("# config_hash={} seed=4", cfg.hash()));
    assert_eq!(lines.next().unwrap(), SUMMARY_HEADER.join(","));
    assert_eq!(lines.count(), 4);
    let back = load_results(dir.path().join("results.json")).unwrap();
    assert_eq!(back.grid, grid);
    assert_eq!(back.comparisons, comparisons);
    assert_eq!(back.config_hash, cfg.hash());
}

#[test]
fn empty_grid_still_writes_valid_reports() {
    let dir = tempfile::tempdir().unwrap();
    let grid = ExperimentGrid {
        datasets: vec![],
        feature_sets: vec![],
        classifiers: vec![],
        records: vec![],
        failures: vec![],
        selections: vec![],
    };
    let comparisons = all_comparisons(&grid);
    assert!(comparisons.iter().all(|c| c.report.is_none() && c.error.is_some()));
    emit_reports(&grid, &comparisons, dir.path(), &RunMeta::new(&ExperimentConfig::default(), 0)).unwrap();
    assert_eq!(read(&dir.path().join("table_feature_sets.csv")).lines().count(), 2);
    assert_eq!(read(&dir.path().join("pvalues_classifiers_accuracy.csv")).lines().count(), 2);
    assert_eq!(load_results(dir.path().join("results.json")).unwrap().grid, grid);
}

#[test]
fn confusion_matches_hand_counts() {
    let c = Confusion::from_predictions(&[1, 1, 0, 0, 1], &[1, 0, 0, 1, 1]);
    assert_eq!((c.tp, c.fn_, c.tn, c.fp), (2, 1, 1, 1));
    assert_eq!(c.accuracy(), 60.0);
    assert!((c.f_measure() - 2.0 / 3.0).abs() < 1e-15);
}
