//! Command-line surface: train, predict, and heuristic benchmarking.
//!
//! Exit codes: 0 success, 1 I/O failure, 2 configuration error,
//! 3 non-convergence (or a failed equivalence check in `bench`).

use std::fs;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};

use crate::data::{build_store, parse_svmlight, parse_svmlight_lenient, LabelPolicy};
use crate::error::TrainError;
use crate::model::{load_model_file, predict, save_model_file, support_ids};
use crate::shrink::{train, Heuristic};
use crate::smo::{TrainReport, TrainerConfig, DEFAULT_MAX_ITERATIONS};

#[derive(Debug, Parser)]
#[command(
    name = "parsmo",
    about = "Parallel SMO support vector machine trainer with adaptive shrinking"
)]
pub struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Train a model on an svmlight-format dataset.
    Train(TrainArgs),
    /// Classify a dataset with a trained model.
    Predict(PredictArgs),
    /// Compare heuristics and worker counts on one dataset.
    Bench(BenchArgs),
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum LabelPolicyArg {
    /// Accept only +1/-1 labels.
    Strict,
    /// Map 0 to -1 and 1 to +1.
    ZeroOne,
}

impl From<LabelPolicyArg> for LabelPolicy {
    fn from(value: LabelPolicyArg) -> Self {
        match value {
            LabelPolicyArg::Strict => LabelPolicy::Strict,
            LabelPolicyArg::ZeroOne => LabelPolicy::ZeroOne,
        }
    }
}

#[derive(Debug, Args)]
pub struct TrainArgs {
    /// Training data in svmlight format.
    #[arg(long)]
    pub data: PathBuf,
    /// Regularization parameter C (positive).
    #[arg(long, allow_hyphen_values = true)]
    pub c: f64,
    /// Gaussian kernel width sigma^2 (positive).
    #[arg(long, allow_hyphen_values = true)]
    pub sigma2: f64,
    /// Convergence tolerance.
    #[arg(long, default_value_t = 0.001, allow_hyphen_values = true)]
    pub eps: f64,
    /// Shrinking heuristic name.
    #[arg(long, default_value = "original")]
    pub heuristic: String,
    /// Worker count; defaults to available hardware parallelism.
    #[arg(long)]
    pub workers: Option<usize>,
    /// Where to write the trained model.
    #[arg(long)]
    pub model_out: Option<PathBuf>,
    /// Where to write the JSON training report.
    #[arg(long)]
    pub report: Option<PathBuf>,
    /// Iteration safety cap.
    #[arg(long, default_value_t = DEFAULT_MAX_ITERATIONS)]
    pub max_iter: u64,
    /// How dataset labels map to the two classes.
    #[arg(long, value_enum, default_value_t = LabelPolicyArg::Strict)]
    pub label_policy: LabelPolicyArg,
}

#[derive(Debug, Args)]
pub struct PredictArgs {
    /// Trained model file.
    #[arg(long)]
    pub model: PathBuf,
    /// Data to classify, svmlight format (labels may be 0 placeholders).
    #[arg(long)]
    pub data: PathBuf,
    /// Where to write predictions, one label per line.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct BenchArgs {
    /// Training data in svmlight format.
    #[arg(long)]
    pub data: PathBuf,
    /// Regularization parameter C (positive).
    #[arg(long, allow_hyphen_values = true)]
    pub c: f64,
    /// Gaussian kernel width sigma^2 (positive).
    #[arg(long, allow_hyphen_values = true)]
    pub sigma2: f64,
    /// Comma-separated heuristic names, or `all`.
    #[arg(long)]
    pub heuristics: String,
    /// Comma-separated worker counts.
    #[arg(long, default_value = "1")]
    pub workers: String,
    /// Convergence tolerance.
    #[arg(long, default_value_t = 0.001, allow_hyphen_values = true)]
    pub eps: f64,
    /// Iteration safety cap.
    #[arg(long, default_value_t = DEFAULT_MAX_ITERATIONS)]
    pub max_iter: u64,
    /// How dataset labels map to the two classes.
    #[arg(long, value_enum, default_value_t = LabelPolicyArg::Strict)]
    pub label_policy: LabelPolicyArg,
    /// Assert that every heuristic reproduces the baseline support-vector
    /// set and beta (within 1e-6) at each worker count.
    #[arg(long)]
    pub check_equivalence: bool,
    /// Keep running remaining cells after a non-convergent one.
    #[arg(long)]
    pub keep_going: bool,
}

pub const EXIT_OK: i32 = 0;
pub const EXIT_IO: i32 = 1;
pub const EXIT_CONFIG: i32 = 2;
pub const EXIT_NO_CONVERGENCE: i32 = 3;

pub fn run(cli: Cli) -> i32 {
    match cli.command {
        Command::Train(args) => cmd_train(&args),
        Command::Predict(args) => cmd_predict(&args),
        Command::Bench(args) => cmd_bench(&args),
    }
}

fn read_dataset(
    path: &Path,
    policy: LabelPolicy,
) -> Result<Vec<crate::data::SparseSample>, (i32, String)> {
    let text = fs::read_to_string(path)
        .map_err(|e| (EXIT_IO, format!("cannot read {}: {e}", path.display())))?;
    parse_svmlight(&text, policy)
        .map_err(|e| (EXIT_IO, format!("{}: {e}", path.display())))
}

fn build_config(
    c: f64,
    sigma2: f64,
    eps: f64,
    heuristic: &str,
    workers: Option<usize>,
    max_iter: u64,
) -> Result<TrainerConfig, (i32, String)> {
    let heuristic: Heuristic = heuristic
        .parse()
        .map_err(|e| (EXIT_CONFIG, format!("{e}")))?;
    let mut config = TrainerConfig::new(c, sigma2)
        .with_epsilon(eps)
        .with_heuristic(heuristic);
    if let Some(w) = workers {
        config = config.with_workers(w);
    }
    config.max_iterations = max_iter;
    config
        .validate()
        .map_err(|e| (EXIT_CONFIG, format!("{e}")))?;
    Ok(config)
}

fn train_exit_code(err: &TrainError) -> i32 {
    match err {
        TrainError::NonConvergence { .. } | TrainError::Stalled { .. } => EXIT_NO_CONVERGENCE,
        TrainError::MissingClass | TrainError::Config(_) => EXIT_CONFIG,
        TrainError::Data(_) => EXIT_IO,
    }
}

/// Train per the flags; write the model and report when requested.
pub fn cmd_train(args: &TrainArgs) -> i32 {
    let config = match build_config(
        args.c,
        args.sigma2,
        args.eps,
        &args.heuristic,
        args.workers,
        args.max_iter,
    ) {
        Ok(c) => c,
        Err((code, msg)) => {
            eprintln!("error: {msg}");
            return code;
        }
    };
    let samples = match read_dataset(&args.data, args.label_policy.into()) {
        Ok(s) => s,
        Err((code, msg)) => {
            eprintln!("error: {msg}");
            return code;
        }
    };
    let mut store = match build_store(&samples, config.c) {
        Ok(s) => s,
        Err(e) => {
            eprintln!("error: {e}");
            return EXIT_IO;
        }
    };
    let (mut model, report) = match train(&mut store, &config) {
        Ok(out) => out,
        Err(e) => {
            eprintln!("error: {e}");
            return train_exit_code(&e);
        }
    };
    model.meta.iterations = report.iterations;

    let json = report_json(&report);
    println!("{json}");
    if let Some(path) = &args.report {
        if let Err(e) = fs::write(path, json + "\n") {
            eprintln!("error: cannot write {}: {e}", path.display());
            return EXIT_IO;
        }
    }
    if let Some(path) = &args.model_out {
        if let Err(e) = save_model_file(&model, path) {
            eprintln!("error: cannot write {}: {e}", path.display());
            return EXIT_IO;
        }
    }
    EXIT_OK
}

fn report_json(report: &TrainReport) -> String {
    serde_json::to_string_pretty(report).expect("report serialization cannot fail")
}

/// Classify a dataset; print accuracy when the input carries real labels.
pub fn cmd_predict(args: &PredictArgs) -> i32 {
    let model = match load_model_file(&args.model) {
        Ok(m) => m,
        Err(e) => {
            eprintln!("error: cannot load {}: {e}", args.model.display());
            return EXIT_IO;
        }
    };
    let text = match fs::read_to_string(&args.data) {
        Ok(t) => t,
        Err(e) => {
            eprintln!("error: cannot read {}: {e}", args.data.display());
            return EXIT_IO;
        }
    };
    let (samples, labeled) = match parse_svmlight_lenient(&text) {
        Ok(out) => out,
        Err(e) => {
            eprintln!("error: {}: {e}", args.data.display());
            return EXIT_IO;
        }
    };

    let predictions: Vec<f64> = samples.iter().map(|s| predict(&model, s)).collect();
    let mut out_text = String::with_capacity(3 * predictions.len());
    for p in &predictions {
        out_text.push_str(if *p > 0.0 { "+1\n" } else { "-1\n" });
    }
    match &args.out {
        Some(path) => {
            if let Err(e) = fs::write(path, &out_text) {
                eprintln!("error: cannot write {}: {e}", path.display());
                return EXIT_IO;
            }
        }
        None => print!("{out_text}"),
    }

    if labeled && !samples.is_empty() {
        let correct = samples
            .iter()
            .zip(&predictions)
            .filter(|(s, &p)| s.label == p)
            .count();
        println!(
            "accuracy {:.4} ({correct}/{})",
            correct as f64 / samples.len() as f64,
            samples.len()
        );
    }
    EXIT_OK
}

struct BenchCell {
    heuristic: Heuristic,
    workers: usize,
    outcome: Result<(TrainReport, Vec<usize>), String>,
}

fn parse_heuristics(spec: &str) -> Result<Vec<Heuristic>, String> {
    if spec.eq_ignore_ascii_case("all") {
        return Ok(Heuristic::all().to_vec());
    }
    spec.split(',')
        .map(|name| name.trim().parse::<Heuristic>().map_err(|e| format!("{e}")))
        .collect()
}

fn parse_workers(spec: &str) -> Result<Vec<usize>, String> {
    spec.split(',')
        .map(|tok| {
            tok.trim()
                .parse::<usize>()
                .map_err(|_| format!("bad worker count `{tok}`"))
                .and_then(|w| {
                    if w == 0 {
                        Err("worker count must be >= 1".into())
                    } else {
                        Ok(w)
                    }
                })
        })
        .collect()
}

/// Run every (heuristic, workers) cell and print a comparison table.
pub fn cmd_bench(args: &BenchArgs) -> i32 {
    let heuristics = match parse_heuristics(&args.heuristics) {
        Ok(h) => h,
        Err(msg) => {
            eprintln!("error: {msg}");
            return EXIT_CONFIG;
        }
    };
    let worker_counts = match parse_workers(&args.workers) {
        Ok(w) => w,
        Err(msg) => {
            eprintln!("error: {msg}");
            return EXIT_CONFIG;
        }
    };
    // Validate shared numeric flags once up front.
    if let Err((code, msg)) = build_config(args.c, args.sigma2, args.eps, "original", None, 1) {
        eprintln!("error: {msg}");
        return code;
    }
    let samples = match read_dataset(&args.data, args.label_policy.into()) {
        Ok(s) => s,
        Err((code, msg)) => {
            eprintln!("error: {msg}");
            return code;
        }
    };
    let mut store = match build_store(&samples, args.c) {
        Ok(s) => s,
        Err(e) => {
            eprintln!("error: {e}");
            return EXIT_IO;
        }
    };

    let mut cells = Vec::new();
    let mut any_failed = false;
    'outer: for &workers in &worker_counts {
        for &heuristic in &heuristics {
            let mut config = TrainerConfig::new(args.c, args.sigma2)
                .with_epsilon(args.eps)
                .with_heuristic(heuristic)
                .with_workers(workers);
            config.max_iterations = args.max_iter;
            let outcome = match train(&mut store, &config) {
                Ok((_, report)) => Ok((report, support_ids(&store))),
                Err(e) => {
                    any_failed = true;
                    Err(format!("{e}"))
                }
            };
            cells.push(BenchCell {
                heuristic,
                workers,
                outcome,
            });
            if any_failed && !args.keep_going {
                break 'outer;
            }
        }
    }

    println!(
        "{:<12} {:>7} {:>10} {:>9} {:>9} {:>9} {:>7} {:>8} {:>12}  status",
        "heuristic", "workers", "iters", "total_s", "train_s", "recon_s", "recons", "n_sv", "beta"
    );
    for cell in &cells {
        match &cell.outcome {
            Ok((r, _)) => println!(
                "{:<12} {:>7} {:>10} {:>9.3} {:>9.3} {:>9.3} {:>7} {:>8} {:>12.6}  ok",
                cell.heuristic.name(),
                cell.workers,
                r.iterations,
                r.wall_seconds,
                r.train_seconds,
                r.recon_seconds,
                r.recon_count,
                r.n_support,
                r.beta
            ),
            Err(msg) => println!(
                "{:<12} {:>7} {:>10} {:>9} {:>9} {:>9} {:>7} {:>8} {:>12}  FAILED: {msg}",
                cell.heuristic.name(),
                cell.workers,
                "-",
                "-",
                "-",
                "-",
                "-",
                "-",
                "-"
            ),
        }
    }

    if any_failed && !args.keep_going {
        return EXIT_NO_CONVERGENCE;
    }

    if args.check_equivalence {
        let mut mismatch = false;
        for &workers in &worker_counts {
            let group: Vec<&BenchCell> = cells
                .iter()
                .filter(|c| c.workers == workers && c.outcome.is_ok())
                .collect();
            let Some(baseline) = group
                .iter()
                .find(|c| c.heuristic == Heuristic::Original)
                .or_else(|| group.first())
            else {
                continue;
            };
            let (base_report, base_ids) = baseline.outcome.as_ref().unwrap();
            for cell in &group {
                let (report, ids) = cell.outcome.as_ref().unwrap();
                let beta_ok = (report.beta - base_report.beta).abs() <= 1e-6;
                let ids_ok = ids == base_ids;
                if !(beta_ok && ids_ok) {
                    mismatch = true;
                    eprintln!(
                        "equivalence mismatch: {} (W={workers}) vs {}: |sv|={} vs {}, beta {} vs {}",
                        cell.heuristic.name(),
                        baseline.heuristic.name(),
                        ids.len(),
                        base_ids.len(),
                        report.beta,
                        base_report.beta
                    );
                }
            }
        }
        if mismatch {
            return EXIT_NO_CONVERGENCE;
        }
        println!("equivalence check passed");
    }
    EXIT_OK
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn heuristic_list_parsing() {
        assert_eq!(parse_heuristics("all").unwrap().len(), 13);
        let two = parse_heuristics("original,multi5pc").unwrap();
        assert_eq!(two.len(), 2);
        assert!(parse_heuristics("original,bogus").is_err());
    }

    #[test]
    fn worker_list_parsing() {
        assert_eq!(parse_workers("1,4").unwrap(), vec![1, 4]);
        assert!(parse_workers("0").is_err());
        assert!(parse_workers("x").is_err());
    }

    #[test]
    fn negative_c_is_config_error() {
        let err = build_config(-1.0, 1.0, 1e-3, "original", None, 100).unwrap_err();
        assert_eq!(err.0, EXIT_CONFIG);
    }

    #[test]
    fn unknown_heuristic_is_config_error() {
        let err = build_config(1.0, 1.0, 1e-3, "bogus", None, 100).unwrap_err();
        assert_eq!(err.0, EXIT_CONFIG);
    }
}
