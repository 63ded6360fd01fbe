//! The experiment harness: repeated stratified splits, per-method training,
//! metric collection, and significance testing against the weighted vote.

use std::path::PathBuf;

use serde::{Deserialize, Serialize};

use damvi::dataset::{
    random_oversample, smote, stratified_split, subsample_to_ratio, Dataset,
    DEFAULT_SMOTE_NEIGHBORS,
};
use damvi::metrics::{average_precision, f1_score, wilcoxon_rank_sum, ScoredPredictions};
use damvi::train::{derive_seed, train_damvi, train_uniform_bagging, DamviConfig};
use damvi::vote::{ensemble_score, predict_mv, Ensemble};

use crate::source::DataSource;
use crate::CliError;

/// The trainable methods. `Damvi` is the weighted vote; the others are
/// bagging over (optionally resampled) data with uniform weights.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, clap::ValueEnum, Serialize, Deserialize)]
#[clap(rename_all = "kebab-case")]
#[serde(rename_all = "kebab-case")]
pub enum Method {
    Damvi,
    UniformBagging,
    RosBagging,
    SmoteBagging,
    BalancedBagging,
}

impl Method {
    pub const ALL: [Method; 5] = [
        Method::Damvi,
        Method::UniformBagging,
        Method::RosBagging,
        Method::SmoteBagging,
        Method::BalancedBagging,
    ];

    pub fn name(&self) -> &'static str {
        match self {
            Method::Damvi => "damvi",
            Method::UniformBagging => "uniform-bagging",
            Method::RosBagging => "ros-bagging",
            Method::SmoteBagging => "smote-bagging",
            Method::BalancedBagging => "balanced-bagging",
        }
    }

    /// Stable stream index for seed derivation, independent of the position
    /// in the method list.
    fn stream(&self) -> u64 {
        match self {
            Method::Damvi => 0,
            Method::UniformBagging => 1,
            Method::RosBagging => 2,
            Method::SmoteBagging => 3,
            Method::BalancedBagging => 4,
        }
    }
}

impl std::fmt::Display for Method {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

/// Everything a comparison or sweep run needs.
#[derive(Debug, Clone)]
pub struct ExperimentConfig {
    pub source: DataSource,
    pub test_fraction: f64,
    pub repetitions: usize,
    pub methods: Vec<Method>,
    pub damvi: DamviConfig,
    pub out_dir: PathBuf,
    pub seed: u64,
}

impl ExperimentConfig {
    pub fn validate(&self) -> Result<(), CliError> {
        if self.repetitions == 0 {
            return Err(CliError::Usage("repetitions must be at least 1".into()));
        }
        if self.methods.is_empty() {
            return Err(CliError::Usage("method list must not be empty".into()));
        }
        Ok(())
    }
}

// Seed sub-stream purposes, hierarchical under the base seed.
const STREAM_DATASET: u64 = 0;
const STREAM_COMPARE: u64 = 1;
const STREAM_SWEEP: u64 = 2;
const REP_STREAM_SPLIT: u64 = 0;
const REP_STREAM_TRAIN: u64 = 1;
const REP_STREAM_RESAMPLE_BASE: u64 = 2;

/// Seed used when the data source is synthetic.
pub fn dataset_seed(base: u64) -> u64 {
    derive_seed(base, STREAM_DATASET)
}

/// One (method, repetition) measurement.
#[derive(Debug, Clone, PartialEq)]
pub struct RunRow {
    pub method: Method,
    pub repetition: usize,
    pub f1: f64,
    pub ap: f64,
}

/// Per-method aggregate with Wilcoxon p-values against the weighted vote.
#[derive(Debug, Clone, PartialEq)]
pub struct SummaryRow {
    pub method: Method,
    pub f1_mean: f64,
    pub f1_std: f64,
    pub ap_mean: f64,
    pub ap_std: f64,
    pub p_f1: f64,
    pub p_ap: f64,
}

/// One (imbalance ratio, method, repetition) measurement.
#[derive(Debug, Clone, PartialEq)]
pub struct SweepRow {
    pub ir: f64,
    pub method: Method,
    pub repetition: usize,
    pub f1: f64,
    pub ap: f64,
}

/// Trains one method on a train split and scores it on the test split.
/// All methods in a repetition share the same training seed, so the
/// weighted vote and uniform bagging see identical base classifiers and
/// differ only in the learned weights.
pub fn evaluate_method(
    method: Method,
    train: &Dataset,
    test: &Dataset,
    base: &DamviConfig,
    rep_seed: u64,
) -> Result<(f64, f64), CliError> {
    let mut config = base.clone();
    config.seed = derive_seed(rep_seed, REP_STREAM_TRAIN);
    let resample_seed = derive_seed(rep_seed, REP_STREAM_RESAMPLE_BASE + method.stream());

    let ensemble: Ensemble = match method {
        Method::Damvi => train_damvi(train, &config)?.ensemble,
        Method::UniformBagging => train_uniform_bagging(train, &config)?,
        Method::RosBagging => {
            let resampled = random_oversample(train, resample_seed)?;
            train_uniform_bagging(&resampled, &config)?
        }
        Method::SmoteBagging => {
            let resampled = smote(train, DEFAULT_SMOTE_NEIGHBORS, resample_seed)?;
            train_uniform_bagging(&resampled, &config)?
        }
        Method::BalancedBagging => {
            let resampled = subsample_to_ratio(train, 0.5, resample_seed)?;
            train_uniform_bagging(&resampled, &config)?
        }
    };

    score_ensemble(&ensemble, test)
}

/// F1 on hard predictions and average precision on the vote margins.
pub fn score_ensemble(ensemble: &Ensemble, test: &Dataset) -> Result<(f64, f64), CliError> {
    let labels = test.labels();
    let mut predictions = Vec::with_capacity(test.len());
    let mut scores = Vec::with_capacity(test.len());
    for ex in test.examples() {
        predictions.push(predict_mv(ensemble, &ex.features)?);
        scores.push(ensemble_score(ensemble, &ex.features)?);
    }
    let f1 = f1_score(&predictions, &labels)?;
    let ap = average_precision(&ScoredPredictions::new(scores, labels)?)?;
    Ok((f1, ap))
}

fn run_block(
    config: &ExperimentConfig,
    ds: &Dataset,
    block_seed: u64,
) -> Result<Vec<RunRow>, CliError> {
    let mut rows = Vec::new();
    for rep in 0..config.repetitions {
        let rep_seed = derive_seed(block_seed, rep as u64);
        let split_seed = derive_seed(rep_seed, REP_STREAM_SPLIT);
        let (train, test) = stratified_split(ds, config.test_fraction, split_seed)?;
        for &method in &config.methods {
            let (f1, ap) = evaluate_method(method, &train, &test, &config.damvi, rep_seed)?;
            rows.push(RunRow {
                method,
                repetition: rep,
                f1,
                ap,
            });
        }
    }
    Ok(rows)
}

/// Runs every method over repeated fresh splits and aggregates per-method
/// means, standard deviations, and Wilcoxon p-values against the weighted
/// vote.
pub fn run_compare(
    config: &ExperimentConfig,
    ds: &Dataset,
) -> Result<(Vec<RunRow>, Vec<SummaryRow>), CliError> {
    config.validate()?;
    if !config.methods.contains(&Method::Damvi) {
        return Err(CliError::Usage(
            "compare requires the damvi method for the significance columns".into(),
        ));
    }
    let rows = run_block(config, ds, derive_seed(config.seed, STREAM_COMPARE))?;

    let series = |method: Method, pick: fn(&RunRow) -> f64| -> Vec<f64> {
        rows.iter()
            .filter(|r| r.method == method)
            .map(pick)
            .collect()
    };
    let damvi_f1 = series(Method::Damvi, |r| r.f1);
    let damvi_ap = series(Method::Damvi, |r| r.ap);

    let mut summary = Vec::new();
    for &method in &config.methods {
        let f1s = series(method, |r| r.f1);
        let aps = series(method, |r| r.ap);
        summary.push(SummaryRow {
            method,
            f1_mean: mean(&f1s),
            f1_std: sample_std(&f1s),
            ap_mean: mean(&aps),
            ap_std: sample_std(&aps),
            p_f1: wilcoxon_rank_sum(&f1s, &damvi_f1)?.p_value,
            p_ap: wilcoxon_rank_sum(&aps, &damvi_ap)?.p_value,
        });
    }
    Ok((rows, summary))
}

/// Reruns the comparison at each target imbalance ratio, subsampling the
/// base dataset down to the ratio first.
pub fn run_sweep(
    config: &ExperimentConfig,
    ds: &Dataset,
    ir_grid: &[f64],
) -> Result<Vec<SweepRow>, CliError> {
    config.validate()?;
    if ir_grid.is_empty() {
        return Err(CliError::Usage("ir grid must not be empty".into()));
    }
    let sweep_base = derive_seed(config.seed, STREAM_SWEEP);
    let mut rows = Vec::new();
    for (idx, &ir) in ir_grid.iter().enumerate() {
        let ir_seed = derive_seed(sweep_base, idx as u64);
        let reduced = subsample_to_ratio(ds, ir, ir_seed)?;
        for row in run_block(config, &reduced, ir_seed)? {
            rows.push(SweepRow {
                ir,
                method: row.method,
                repetition: row.repetition,
                f1: row.f1,
                ap: row.ap,
            });
        }
    }
    Ok(rows)
}

pub fn mean(values: &[f64]) -> f64 {
    values.iter().sum::<f64>() / values.len() as f64
}

/// Sample standard deviation; 0 for fewer than two values.
pub fn sample_std(values: &[f64]) -> f64 {
    if values.len() < 2 {
        return 0.0;
    }
    let m = mean(values);
    let var = values.iter().map(|v| (v - m) * (v - m)).sum::<f64>() / (values.len() - 1) as f64;
    var.sqrt()
}

/// Writes the per-repetition rows as CSV.
pub fn write_runs_csv<W: std::io::Write>(rows: &[RunRow], writer: W) -> Result<(), CliError> {
    let mut wtr = csv::Writer::from_writer(writer);
    wtr.write_record(["method", "repetition", "f1", "ap"])
        .map_err(io_err)?;
    for r in rows {
        wtr.write_record([
            r.method.name().to_string(),
            r.repetition.to_string(),
            r.f1.to_string(),
            r.ap.to_string(),
        ])
        .map_err(io_err)?;
    }
    wtr.flush().map_err(|e| CliError::Data(e.into()))?;
    Ok(())
}

/// Writes the summary table as CSV.
pub fn write_summary_csv<W: std::io::Write>(
    rows: &[SummaryRow],
    writer: W,
) -> Result<(), CliError> {
    let mut wtr = csv::Writer::from_writer(writer);
    wtr.write_record([
        "method", "f1_mean", "f1_std", "ap_mean", "ap_std", "p_f1", "p_ap",
    ])
    .map_err(io_err)?;
    for r in rows {
        wtr.write_record([
            r.method.name().to_string(),
            r.f1_mean.to_string(),
            r.f1_std.to_string(),
            r.ap_mean.to_string(),
            r.ap_std.to_string(),
            r.p_f1.to_string(),
            r.p_ap.to_string(),
        ])
        .map_err(io_err)?;
    }
    wtr.flush().map_err(|e| CliError::Data(e.into()))?;
    Ok(())
}

/// Writes sweep rows as CSV.
pub fn write_sweep_csv<W: std::io::Write>(rows: &[SweepRow], writer: W) -> Result<(), CliError> {
    let mut wtr = csv::Writer::from_writer(writer);
    wtr.write_record(["ir", "method", "repetition", "f1", "ap"])
        .map_err(io_err)?;
    for r in rows {
        wtr.write_record([
            r.ir.to_string(),
            r.method.name().to_string(),
            r.repetition.to_string(),
            r.f1.to_string(),
            r.ap.to_string(),
        ])
        .map_err(io_err)?;
    }
    wtr.flush().map_err(|e| CliError::Data(e.into()))?;
    Ok(())
}

fn io_err(e: csv::Error) -> CliError {
    CliError::Data(e.into())
}
