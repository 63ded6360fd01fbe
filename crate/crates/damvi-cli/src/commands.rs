//! Subcommand implementations. Each takes parsed flags, drives the library,
//! and writes versioned JSON / CSV artifacts.

use std::fs;
use std::path::PathBuf;

use clap::Args;
use serde::Serialize;

use damvi::cbound::{write_trace_csv, OptimizerConfig};
use damvi::dataset::load_csv;
use damvi::metrics::{average_precision, f1_score, ScoredPredictions};
use damvi::train::{train_damvi, DamviConfig, TrainingReport};
use damvi::tree::TreeParams;
use damvi::vote::{ensemble_score, predict_mv, Ensemble};

use crate::experiment::{
    dataset_seed, run_compare, run_sweep, write_runs_csv, write_summary_csv, write_sweep_csv,
    ExperimentConfig, Method,
};
use crate::source::{DataSource, SyntheticSpec};
use crate::CliError;

/// Version tag carried by every emitted JSON file.
pub const REPORT_FORMAT_VERSION: u32 = 1;

#[derive(Debug, Clone, Args)]
pub struct DataArgs {
    /// CSV dataset path (header row; the label column is selected by name).
    #[arg(
        long,
        conflicts_with = "synthetic",
        required_unless_present = "synthetic"
    )]
    pub data: Option<PathBuf>,

    /// Synthetic dataset spec, e.g. n=5000,d=10,ir=0.02,sep=2.0
    #[arg(long)]
    pub synthetic: Option<SyntheticSpec>,

    /// Name of the label column in the CSV.
    #[arg(long, default_value = "label")]
    pub label_column: String,

    /// Raw label value mapped to the positive class; everything else is
    /// negative.
    #[arg(long, default_value = "1")]
    pub positive_label: String,
}

impl DataArgs {
    pub fn source(&self) -> Result<DataSource, CliError> {
        match (&self.data, &self.synthetic) {
            (Some(path), None) => Ok(DataSource::Csv {
                path: path.clone(),
                label_column: self.label_column.clone(),
                positive_label: self.positive_label.clone(),
            }),
            (None, Some(spec)) => Ok(DataSource::Synthetic(spec.clone())),
            _ => Err(CliError::Usage(
                "exactly one of --data and --synthetic is required".into(),
            )),
        }
    }
}

#[derive(Debug, Clone, Args)]
pub struct ModelArgs {
    /// Number of base classifiers.
    #[arg(long, default_value_t = 100)]
    pub k: usize,

    /// Bootstrap size as a fraction of the training set.
    #[arg(long, default_value_t = 0.2)]
    pub bootstrap_fraction: f64,

    /// Maximum tree depth; omitted means fully grown.
    #[arg(long)]
    pub max_depth: Option<u32>,

    #[arg(long, default_value_t = 2)]
    pub min_samples_split: usize,

    #[arg(long, default_value_t = 1)]
    pub min_samples_leaf: usize,

    /// Random restarts of the weight optimizer.
    #[arg(long, default_value_t = 4)]
    pub restarts: usize,

    /// Optimizer convergence tolerance.
    #[arg(long, default_value_t = 1e-10)]
    pub tol: f64,

    #[arg(long, default_value_t = 0)]
    pub seed: u64,
}

impl ModelArgs {
    pub fn damvi_config(&self) -> DamviConfig {
        DamviConfig {
            k: self.k,
            bootstrap_fraction: self.bootstrap_fraction,
            tree_params: TreeParams {
                max_depth: self.max_depth,
                min_samples_split: self.min_samples_split,
                min_samples_leaf: self.min_samples_leaf,
            },
            optimizer: OptimizerConfig {
                restarts: self.restarts,
                tol: self.tol,
                ..OptimizerConfig::default()
            },
            seed: self.seed,
        }
    }
}

#[derive(Debug, Args)]
pub struct TrainArgs {
    #[command(flatten)]
    pub data: DataArgs,

    #[command(flatten)]
    pub model: ModelArgs,

    /// Output directory for model.json and report.json.
    #[arg(long)]
    pub out: PathBuf,

    /// Also write the optimizer trace to trace.csv.
    #[arg(long, default_value_t = false)]
    pub trace: bool,
}

#[derive(Serialize)]
struct ReportFile<'a> {
    format_version: u32,
    #[serde(flatten)]
    report: &'a TrainingReport,
}

/// Trains the weighted vote and writes model.json plus report.json.
pub fn cmd_train(args: &TrainArgs) -> Result<(), CliError> {
    let source = args.data.source()?;
    let ds = source.load(dataset_seed(args.model.seed))?;

    let mut config = args.model.damvi_config();
    config.optimizer.record_trace = args.trace;
    let output = train_damvi(&ds, &config)?;

    fs::create_dir_all(&args.out).map_err(|e| CliError::Data(e.into()))?;
    fs::write(
        args.out.join("model.json"),
        output.ensemble.to_json_string()?,
    )
    .map_err(|e| CliError::Data(e.into()))?;
    let report = serde_json::to_string_pretty(&ReportFile {
        format_version: REPORT_FORMAT_VERSION,
        report: &output.report,
    })
    .map_err(|e| CliError::Data(e.into()))?;
    fs::write(args.out.join("report.json"), report).map_err(|e| CliError::Data(e.into()))?;

    if args.trace {
        let file =
            fs::File::create(args.out.join("trace.csv")).map_err(|e| CliError::Data(e.into()))?;
        write_trace_csv(&output.optimizer.trace, file)?;
    }
    Ok(())
}

#[derive(Debug, Args)]
pub struct EvaluateArgs {
    /// Path to a model.json produced by train.
    #[arg(long)]
    pub model: PathBuf,

    /// CSV dataset to evaluate on.
    #[arg(long)]
    pub data: PathBuf,

    #[arg(long, default_value = "label")]
    pub label_column: String,

    #[arg(long, default_value = "1")]
    pub positive_label: String,

    /// Optional file for the metrics JSON (always printed to stdout).
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Serialize)]
struct MetricsFile {
    format_version: u32,
    f1: f64,
    average_precision: f64,
    n: usize,
    positive_count: usize,
}

/// Scores a saved model on a dataset and emits the metrics JSON.
pub fn cmd_evaluate(args: &EvaluateArgs) -> Result<String, CliError> {
    let model_json = fs::read_to_string(&args.model).map_err(|e| CliError::Data(e.into()))?;
    let ensemble = Ensemble::from_json_str(&model_json)?;
    let ds = load_csv(&args.data, &args.label_column, &args.positive_label)?;

    let labels = ds.labels();
    let mut predictions = Vec::with_capacity(ds.len());
    let mut scores = Vec::with_capacity(ds.len());
    for ex in ds.examples() {
        predictions.push(predict_mv(&ensemble, &ex.features)?);
        scores.push(ensemble_score(&ensemble, &ex.features)?);
    }
    let metrics = MetricsFile {
        format_version: REPORT_FORMAT_VERSION,
        f1: f1_score(&predictions, &labels)?,
        average_precision: average_precision(&ScoredPredictions::new(scores, labels)?)?,
        n: ds.len(),
        positive_count: ds.positive_count(),
    };
    let json = serde_json::to_string_pretty(&metrics).map_err(|e| CliError::Data(e.into()))?;
    if let Some(out) = &args.out {
        fs::write(out, &json).map_err(|e| CliError::Data(e.into()))?;
    }
    Ok(json)
}

#[derive(Debug, Args)]
pub struct CompareArgs {
    #[command(flatten)]
    pub data: DataArgs,

    #[command(flatten)]
    pub model: ModelArgs,

    /// Methods to compare; must include damvi.
    #[arg(long, value_delimiter = ',', default_values_t = Method::ALL)]
    pub methods: Vec<Method>,

    /// Number of repeated random splits.
    #[arg(long, default_value_t = 5)]
    pub reps: usize,

    /// Fraction of data held out for testing in each repetition.
    #[arg(long, default_value_t = 0.3)]
    pub test_fraction: f64,

    /// Output directory for compare_runs.csv and compare_summary.csv.
    #[arg(long)]
    pub out: PathBuf,
}

impl CompareArgs {
    fn experiment_config(&self) -> Result<ExperimentConfig, CliError> {
        Ok(ExperimentConfig {
            source: self.data.source()?,
            test_fraction: self.test_fraction,
            repetitions: self.reps,
            methods: self.methods.clone(),
            damvi: self.model.damvi_config(),
            out_dir: self.out.clone(),
            seed: self.model.seed,
        })
    }
}

/// Runs the method comparison and writes the per-repetition and summary
/// tables.
pub fn cmd_compare(args: &CompareArgs) -> Result<(), CliError> {
    let config = args.experiment_config()?;
    let ds = config.source.load(dataset_seed(config.seed))?;
    let (rows, summary) = run_compare(&config, &ds)?;

    fs::create_dir_all(&config.out_dir).map_err(|e| CliError::Data(e.into()))?;
    let runs = fs::File::create(config.out_dir.join("compare_runs.csv"))
        .map_err(|e| CliError::Data(e.into()))?;
    write_runs_csv(&rows, runs)?;
    let summary_file = fs::File::create(config.out_dir.join("compare_summary.csv"))
        .map_err(|e| CliError::Data(e.into()))?;
    write_summary_csv(&summary, summary_file)?;
    Ok(())
}

#[derive(Debug, Args)]
pub struct SweepArgs {
    #[command(flatten)]
    pub compare: CompareArgs,

    /// Imbalance-ratio grid, e.g. 0.005,0.01,0.02,0.04
    #[arg(long, value_delimiter = ',', required = true)]
    pub ir_grid: Vec<f64>,
}

/// Reruns the comparison at each imbalance ratio and writes sweep.csv.
pub fn cmd_sweep(args: &SweepArgs) -> Result<(), CliError> {
    let config = args.compare.experiment_config()?;
    let ds = config.source.load(dataset_seed(config.seed))?;
    let rows = run_sweep(&config, &ds, &args.ir_grid)?;

    fs::create_dir_all(&config.out_dir).map_err(|e| CliError::Data(e.into()))?;
    let file =
        fs::File::create(config.out_dir.join("sweep.csv")).map_err(|e| CliError::Data(e.into()))?;
    write_sweep_csv(&rows, file)?;
    Ok(())
}
