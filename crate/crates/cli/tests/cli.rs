use std::path::Path;
use std::process::{Command, Output};

fn run(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_changeprone")).args(args).output().unwrap()
}

fn code(o: &Output) -> i32 {
    o.status.code().unwrap()
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn synth(path: &Path, seed: &str) {
    let o = run(&[
        "synth",
        "--rows",
        "60",
        "--informative",
        "CBO,LOC",
        "--separation",
        "3",
        "--seed",
        seed,
        "--out",
        path.to_str().unwrap(),
    ]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
}

fn small_run(data: &Path, out: &Path, extra: &[&str]) -> Output {
    let mut args = vec![
        "run",
        "--data",
        data.to_str().unwrap(),
        "--out",
        out.to_str().unwrap(),
        "--feature-sets",
        "AM,PFST",
        "--classifiers",
        "LINR,SVM-LIN",
    ];
    args.extend_from_slice(extra);
    run(&args)
}

#[test]
fn usage_errors_exit_with_one() {
    assert_eq!(code(&run(&[])), 1);
    assert_eq!(code(&run(&["frobnicate"])), 1);
    assert_eq!(code(&run(&["synth", "--rows", "ten"])), 1);
    assert_eq!(code(&run(&["--help"])), 0);
}

#[test]
fn synth_writes_a_loadable_csv() {
    let dir = tempfile::tempdir().unwrap();
    let f = dir.path().join("d.csv");
    synth(&f, "4");
    let text = std::fs::read_to_string(&f).unwrap();
    let header = text.lines().next().unwrap();
    assert_eq!(header.split(',').count(), 22);
    assert!(header.ends_with("changed"));
    assert_eq!(text.lines().count(), 61);
}

#[test]
fn select_prints_the_chosen_metrics() {
    let dir = tempfile::tempdir().unwrap();
    let f = dir.path().join("d.csv");
    synth(&f, "4");
    let o = run(&["select", "--data", f.to_str().unwrap(), "--method", "pfst"]);
    assert_eq!(code(&o), 0);
    let line = stdout(&o);
    assert!(line.starts_with("PFST: "), "{line}");
    assert!(line.contains("CBO") || line.contains("LOC"), "{line}");

    let o = run(&["select", "--data", f.to_str().unwrap(), "--method", "fr1", "--json"]);
    assert_eq!(code(&o), 0);
    let v: serde_json::Value = serde_json::from_str(&stdout(&o)).unwrap();
    assert_eq!(v["label"], "FR1");

    assert_eq!(code(&run(&["select", "--data", f.to_str().unwrap(), "--method", "fs9"])), 1);
}

#[test]
fn bad_data_exits_with_two() {
    let dir = tempfile::tempdir().unwrap();
    let missing = dir.path().join("nope.csv");
    let out = dir.path().join("out");
    assert_eq!(code(&small_run(&missing, &out, &[])), 2);

    let single = dir.path().join("single.csv");
    std::fs::write(&single, "LOC,changed\n1,1\n2,1\n3,1\n").unwrap();
    assert_eq!(code(&small_run(&single, &out, &[])), 2);

    let empty_dir = dir.path().join("empty");
    std::fs::create_dir(&empty_dir).unwrap();
    assert_eq!(code(&small_run(&empty_dir, &out, &[])), 2);
}

#[test]
fn unknown_config_key_is_a_usage_error() {
    let dir = tempfile::tempdir().unwrap();
    let f = dir.path().join("d.csv");
    synth(&f, "1");
    let cfg = dir.path().join("c.toml");
    std::fs::write(&cfg, "seed = 3\nsvm_cost = 2.0\n").unwrap();
    let o = small_run(&f, &dir.path().join("out"), &["--config", cfg.to_str().unwrap()]);
    assert_eq!(code(&o), 1);
    assert!(String::from_utf8_lossy(&o.stderr).contains("svm_cost"));
}

#[test]
fn partial_grid_exits_with_three_and_still_reports() {
    let dir = tempfile::tempdir().unwrap();
    let f = dir.path().join("d.csv");
    synth(&f, "2");
    let cfg = dir.path().join("c.toml");
    std::fs::write(&cfg, "svm_c = -1.0\n").unwrap();
    let out = dir.path().join("out");
    let o = small_run(&f, &out, &["--config", cfg.to_str().unwrap()]);
    assert_eq!(code(&o), 3);
    assert!(out.join("results.json").exists());
    assert!(out.join("run_info.json").exists());
}

#[test]
fn run_then_compare() {
    let dir = tempfile::tempdir().unwrap();
    let data = dir.path().join("data");
    std::fs::create_dir(&data).unwrap();
    synth(&data.join("a.csv"), "1");
    synth(&data.join("b.csv"), "2");
    let out = dir.path().join("out");
    let o = small_run(&data, &out, &["--seed", "5", "--jobs", "2"]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    assert!(stdout(&o).starts_with("8 cells evaluated, 0 failed"));
    for name in [
        "table_classifiers.csv",
        "table_feature_sets.csv",
        "pvalues_classifiers_accuracy.csv",
        "mean_difference_feature_sets_f_measure.csv",
        "boxplot_classifiers_accuracy.csv",
        "pfst_trace_a.json",
        "pfst_selection_b.csv",
    ] {
        assert!(out.join(name).exists(), "{name}");
    }

    let results = out.join("results.json");
    let o = run(&["compare", "--results", results.to_str().unwrap(), "--axis", "classifiers", "--measure", "accuracy"]);
    assert_eq!(code(&o), 0);
    let text = stdout(&o);
    assert!(text.starts_with("classifiers / accuracy: 2 methods, 4 observations, 1 pairs"), "{text}");
    assert_eq!(text.lines().count(), 4);

    let o = run(&["compare", "--results", results.to_str().unwrap(), "--axis", "feature-sets"]);
    assert_eq!(code(&o), 0);
    assert_eq!(stdout(&o).matches("feature-sets / ").count(), 2);

    let o = run(&["compare", "--results", results.to_str().unwrap(), "--axis", "datasets"]);
    assert_eq!(code(&o), 1);
    let o = run(&["compare", "--results", dir.path().join("none.json").to_str().unwrap(), "--axis", "classifiers"]);
    assert_eq!(code(&o), 2);
}
