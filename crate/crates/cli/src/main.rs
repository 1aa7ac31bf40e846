use std::path::{Path, PathBuf};
use std::process::ExitCode;

use changeprone::classifiers::ClassifierKind;
use changeprone::dataset::{load_csv, synthesize, write_csv, LoadOptions, Metric, MetricDataset, SynthSpec};
use changeprone::feature_set::FeatureSetLabel;
use changeprone::harness::{
    all_comparisons, compare, emit_reports, load_results, run_grid, select_one, unix_now, write_run_info, Axis,
    ExperimentConfig, FlatConfig, GridOptions, HarnessError, Measure, RunInfo, RunMeta,
};
use clap::{Args, Parser, Subcommand};

const EXIT_USAGE: u8 = 1;
const EXIT_DATA: u8 = 2;
const EXIT_PARTIAL: u8 = 3;

#[derive(Parser)]
#[command(name = "changeprone", version, about = "Metric selection and classifier comparison for change-proneness data")]
struct Cli {
    /// Log verbosity (error, warn, info, debug, trace).
    #[arg(long, global = true, default_value = "warn")]
    log: String,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the full feature-set × classifier grid and write reports.
    Run(RunArgs),
    /// Print the metric set chosen by one selector.
    Select(SelectArgs),
    /// Pairwise comparison from a results.json.
    Compare(CompareArgs),
    /// Write a synthetic dataset with planted signal.
    Synth(SynthArgs),
}

#[derive(Args)]
struct RunArgs {
    /// CSV files or directories of CSV files.
    #[arg(long, required = true, num_args = 1..)]
    data: Vec<PathBuf>,
    #[arg(long, default_value = "changed")]
    label_column: String,
    #[arg(long)]
    out: PathBuf,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    folds: Option<usize>,
    /// Comma-separated feature-set labels (default: all twelve).
    #[arg(long, value_delimiter = ',')]
    feature_sets: Option<Vec<FeatureSetLabel>>,
    /// Comma-separated classifier names (default: all 21).
    #[arg(long, value_delimiter = ',')]
    classifiers: Option<Vec<ClassifierKind>>,
    /// Re-run feature selection inside every training fold.
    #[arg(long)]
    nested: bool,
    #[arg(long)]
    jobs: Option<usize>,
    #[arg(long)]
    config: Option<PathBuf>,
    /// Skip non-metric columns instead of rejecting the file.
    #[arg(long)]
    permissive: bool,
    /// Recompute every cell instead of reusing `<out>/cache`.
    #[arg(long)]
    no_cache: bool,
}

#[derive(Args)]
struct SelectArgs {
    #[arg(long)]
    data: PathBuf,
    #[arg(long, default_value = "changed")]
    label_column: String,
    /// am, fr1..fr5, fs1..fs5, or pfst.
    #[arg(long)]
    method: FeatureSetLabel,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    permissive: bool,
    /// Print the full feature set as JSON.
    #[arg(long)]
    json: bool,
}

#[derive(Args)]
struct CompareArgs {
    #[arg(long)]
    results: PathBuf,
    #[arg(long)]
    axis: Axis,
    /// accuracy, f-measure, or both.
    #[arg(long, default_value = "both")]
    measure: String,
}

#[derive(Args)]
struct SynthArgs {
    #[arg(long)]
    rows: usize,
    /// Comma-separated metrics carrying signal; the rest are noise.
    #[arg(long, value_delimiter = ',', required = true)]
    informative: Vec<Metric>,
    #[arg(long)]
    separation: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    out: PathBuf,
    #[arg(long, default_value_t = 0.5)]
    changed_fraction: f64,
    #[arg(long, default_value = "changed")]
    label_column: String,
}

/// An error and the exit code it maps to.
struct Failure(u8, String);

impl From<HarnessError> for Failure {
    fn from(e: HarnessError) -> Self {
        let code = match e {
            HarnessError::Dataset(_) | HarnessError::BadFoldCount { .. } | HarnessError::DuplicateDataset(_) => EXIT_DATA,
            _ => EXIT_USAGE,
        };
        Failure(code, e.to_string())
    }
}

fn data_error(e: impl std::fmt::Display) -> Failure {
    Failure(EXIT_DATA, e.to_string())
}

fn usage_error(e: impl std::fmt::Display) -> Failure {
    Failure(EXIT_USAGE, e.to_string())
}

fn load_config(path: Option<&Path>) -> Result<(ExperimentConfig, Option<u64>), Failure> {
    let base = ExperimentConfig::default();
    match path {
        None => Ok((base, None)),
        Some(p) => {
            let flat = FlatConfig::load(p).map_err(usage_error)?;
            Ok((flat.apply(&base), flat.seed))
        }
    }
}

/// Expands directories to their `*.csv` files, sorted by name.
fn data_files(inputs: &[PathBuf]) -> Result<Vec<PathBuf>, Failure> {
    let mut files = Vec::new();
    for p in inputs {
        if p.is_dir() {
            let mut found: Vec<PathBuf> = std::fs::read_dir(p)
                .map_err(|e| data_error(format!("{}: {e}", p.display())))?
                .filter_map(|e| e.ok().map(|e| e.path()))
                .filter(|f| f.extension().is_some_and(|x| x.eq_ignore_ascii_case("csv")))
                .collect();
            found.sort();
            if found.is_empty() {
                return Err(data_error(format!("{}: no CSV files", p.display())));
            }
            files.extend(found);
        } else {
            files.push(p.clone());
        }
    }
    Ok(files)
}

fn load(path: &Path, label_column: &str, permissive: bool) -> Result<MetricDataset, Failure> {
    let opts = LoadOptions::new(label_column).permissive(permissive);
    load_csv(path, &opts).map_err(|e| data_error(format!("{}: {e}", path.display())))
}

fn cmd_run(a: RunArgs) -> Result<u8, Failure> {
    let started = unix_now();
    let (mut config, file_seed) = load_config(a.config.as_deref())?;
    if let Some(k) = a.folds {
        config.folds = k;
    }
    config.nested |= a.nested;
    let seed = a.seed.or(file_seed).unwrap_or(0);
    let datasets = data_files(&a.data)?
        .iter()
        .map(|f| load(f, &a.label_column, a.permissive))
        .collect::<Result<Vec<_>, _>>()?;
    let mut opts = GridOptions::new(seed);
    opts.config = config.clone();
    if let Some(fs) = a.feature_sets {
        opts.feature_sets = fs;
    }
    if let Some(k) = a.classifiers {
        opts.classifiers = k;
    }
    opts.jobs = a.jobs;
    if !a.no_cache {
        opts.cache_dir = Some(a.out.join("cache"));
    }
    let grid = run_grid(&datasets, &opts)?;
    let comparisons = all_comparisons(&grid);
    let meta = RunMeta::new(&config, seed);
    let written = emit_reports(&grid, &comparisons, &a.out, &meta)?;
    write_run_info(
        &a.out,
        &RunInfo {
            config_hash: meta.config_hash.clone(),
            seed,
            started_unix: started,
            finished_unix: unix_now(),
            jobs: a.jobs,
            cells: grid.records.len(),
            failed_cells: grid.failures.len(),
            version: env!("CARGO_PKG_VERSION").to_string(),
        },
    )?;
    println!(
        "{} cells evaluated, {} failed; {} report files in {}",
        grid.records.len(),
        grid.failures.len(),
        written.len() + 1,
        a.out.display()
    );
    if grid.failures.is_empty() {
        Ok(0)
    } else {
        for f in &grid.failures {
            eprintln!("failed: {}/{}/{}: {}", f.dataset_id, f.feature_set, f.classifier, f.error);
        }
        Ok(EXIT_PARTIAL)
    }
}

fn cmd_select(a: SelectArgs) -> Result<u8, Failure> {
    let (config, _) = load_config(a.config.as_deref())?;
    let ds = load(&a.data, &a.label_column, a.permissive)?;
    let (fs, _, _) = select_one(&ds, a.method, &config, a.seed).map_err(data_error)?;
    if a.json {
        println!("{}", serde_json::to_string_pretty(&fs).map_err(usage_error)?);
    } else {
        let names: Vec<&str> = fs.members.iter().map(|m| m.as_str()).collect();
        println!("{}: {}", fs.label, names.join(","));
        for w in &fs.warnings {
            eprintln!("warning: {w}");
        }
    }
    Ok(0)
}

fn cmd_compare(a: CompareArgs) -> Result<u8, Failure> {
    let measures: Vec<Measure> = match a.measure.to_ascii_lowercase().as_str() {
        "both" => Measure::BOTH.to_vec(),
        "accuracy" => vec![Measure::Accuracy],
        "f-measure" | "f_measure" | "fmeasure" => vec![Measure::FMeasure],
        other => return Err(usage_error(format!("unknown measure `{other}`"))),
    };
    let results = load_results(&a.results).map_err(data_error)?;
    for m in measures {
        let r = compare(&results.grid, a.axis, m)?;
        println!(
            "{} / {}: {} methods, {} observations, {} pairs, cutoff {:.7}, {} significant{}",
            a.axis,
            m.as_str(),
            r.methods.len(),
            r.n_observations,
            r.n_pairs,
            r.cutoff,
            r.significant_pairs,
            if r.incomplete { " (incomplete grid)" } else { "" }
        );
        let width = r.methods.iter().map(String::len).max().unwrap_or(0).max(8);
        print!("{:width$}", "");
        for name in &r.methods {
            print!(" {name:>width$}");
        }
        println!();
        for (i, name) in r.methods.iter().enumerate() {
            print!("{name:width$}");
            for j in 0..r.methods.len() {
                let mark = if r.significant[i][j] { "*" } else { " " };
                print!(" {:>w$.2}{mark}", r.mean_difference[i][j], w = width - 1);
            }
            println!();
        }
    }
    Ok(0)
}

fn cmd_synth(a: SynthArgs) -> Result<u8, Failure> {
    let spec = SynthSpec::with_all_noise(a.rows, a.informative, a.separation, a.seed).changed_fraction(a.changed_fraction);
    let ds = synthesize(&spec).map_err(usage_error)?;
    write_csv(&ds, &a.out, &a.label_column).map_err(usage_error)?;
    println!("wrote {} rows to {}", ds.n_rows(), a.out.display());
    Ok(0)
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    env_logger::Builder::new().parse_filters(&cli.log).init();
    let outcome = match cli.command {
        Command::Run(a) => cmd_run(a),
        Command::Select(a) => cmd_select(a),
        Command::Compare(a) => cmd_compare(a),
        Command::Synth(a) => cmd_synth(a),
    };
    match outcome {
        Ok(code) => ExitCode::from(code),
        Err(Failure(code, msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(code)
        }
    }
}
