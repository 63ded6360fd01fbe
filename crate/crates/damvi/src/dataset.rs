//! Labeled binary datasets: CSV ingestion, stratified splitting, resampling,
//! and a synthetic generator with controllable class imbalance.
//!
//! Labels are normalized to {-1, +1} at ingestion; +1 is the positive
//! (minority) class everywhere downstream. All sampling operations are pure
//! functions of their inputs and an explicit seed.

use std::io::Read;
use std::path::Path;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};

/// A single labeled example: a real feature vector and a label in {-1, +1}.
#[derive(Debug, Clone, PartialEq)]
pub struct Example {
    pub features: Vec<f64>,
    pub label: i8,
}

impl Example {
    pub fn new(features: Vec<f64>, label: i8) -> Result<Self> {
        if label != -1 && label != 1 {
            return Err(Error::InvalidLabel {
                value: label as i64,
            });
        }
        Ok(Self { features, label })
    }
}

/// An ordered collection of examples sharing a common feature dimension.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    examples: Vec<Example>,
    dimension: usize,
}

impl Dataset {
    /// Builds a dataset, checking that every example has the declared
    /// dimension and a valid label.
    pub fn new(examples: Vec<Example>, dimension: usize) -> Result<Self> {
        if examples.is_empty() {
            return Err(Error::EmptyDataset);
        }
        for ex in &examples {
            if ex.features.len() != dimension {
                return Err(Error::DimensionMismatch {
                    expected: dimension,
                    actual: ex.features.len(),
                });
            }
            if ex.label != -1 && ex.label != 1 {
                return Err(Error::InvalidLabel {
                    value: ex.label as i64,
                });
            }
        }
        Ok(Self {
            examples,
            dimension,
        })
    }

    pub fn examples(&self) -> &[Example] {
        &self.examples
    }

    pub fn dimension(&self) -> usize {
        self.dimension
    }

    pub fn len(&self) -> usize {
        self.examples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.examples.is_empty()
    }

    pub fn labels(&self) -> Vec<i8> {
        self.examples.iter().map(|e| e.label).collect()
    }

    pub fn positive_count(&self) -> usize {
        self.examples.iter().filter(|e| e.label == 1).count()
    }

    pub fn negative_count(&self) -> usize {
        self.len() - self.positive_count()
    }

    /// Fraction of examples in the positive (minority) class.
    pub fn imbalance_ratio(&self) -> f64 {
        self.positive_count() as f64 / self.len() as f64
    }

    fn subset(&self, indices: &[usize]) -> Dataset {
        Dataset {
            examples: indices.iter().map(|&i| self.examples[i].clone()).collect(),
            dimension: self.dimension,
        }
    }
}

/// Rounds to the nearest integer with halves going up, snapping values that
/// sit within 1e-9 of an integer first so that binary fractions like
/// 0.3 * 5 land where exact arithmetic would put them.
pub(crate) fn round_half_up(x: f64) -> usize {
    (snap(x) + 0.5).floor() as usize
}

/// Ceiling with the same snap-to-integer guard.
pub(crate) fn ceil_snapped(x: f64) -> usize {
    snap(x).ceil() as usize
}

fn snap(x: f64) -> f64 {
    if (x - x.round()).abs() < 1e-9 {
        x.round()
    } else {
        x
    }
}

/// Parses a CSV dataset from any reader. First row is the header; the named
/// label column maps to +1 where the raw cell equals `positive_label` and -1
/// otherwise; all remaining columns are features in header order.
pub fn parse_csv<R: Read>(reader: R, label_column: &str, positive_label: &str) -> Result<Dataset> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(true)
        .flexible(false)
        .from_reader(reader);

    let headers = rdr.headers()?.clone();
    let label_idx = headers
        .iter()
        .position(|h| h == label_column)
        .ok_or_else(|| Error::MissingColumn {
            column: label_column.to_string(),
        })?;
    let feature_columns: Vec<(usize, String)> = headers
        .iter()
        .enumerate()
        .filter(|(i, _)| *i != label_idx)
        .map(|(i, h)| (i, h.to_string()))
        .collect();

    let mut examples = Vec::new();
    for (row_idx, record) in rdr.records().enumerate() {
        let record = record?;
        let label_cell = record.get(label_idx).unwrap_or("");
        let label = if label_cell == positive_label { 1 } else { -1 };

        let mut features = Vec::with_capacity(feature_columns.len());
        for (col_idx, col_name) in &feature_columns {
            let cell = record.get(*col_idx).unwrap_or("");
            let value: f64 = cell.trim().parse().map_err(|_| Error::NonNumericCell {
                row: row_idx + 1,
                column: col_name.clone(),
                value: cell.to_string(),
            })?;
            if !value.is_finite() {
                return Err(Error::NonNumericCell {
                    row: row_idx + 1,
                    column: col_name.clone(),
                    value: cell.to_string(),
                });
            }
            features.push(value);
        }
        examples.push(Example { features, label });
    }

    if examples.is_empty() {
        return Err(Error::EmptyDataset);
    }
    Dataset::new(examples, feature_columns.len())
}

/// Loads a CSV dataset from disk. See [`parse_csv`] for the format.
pub fn load_csv(path: &Path, label_column: &str, positive_label: &str) -> Result<Dataset> {
    let file = std::fs::File::open(path).map_err(|e| {
        if e.kind() == std::io::ErrorKind::NotFound {
            Error::MissingFile {
                path: path.to_path_buf(),
            }
        } else {
            Error::Io(e)
        }
    })?;
    parse_csv(std::io::BufReader::new(file), label_column, positive_label)
}

/// Splits into train and test preserving class proportions. Test-set class
/// counts use round-half-up of `class_count * test_fraction`; the remainder
/// goes to train. Deterministic given the seed.
pub fn stratified_split(ds: &Dataset, test_fraction: f64, seed: u64) -> Result<(Dataset, Dataset)> {
    if !(test_fraction > 0.0 && test_fraction < 1.0) {
        return Err(Error::InvalidParameter {
            name: "test_fraction",
            reason: format!("must be in (0, 1), got {test_fraction}"),
        });
    }

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut test_indices = Vec::new();
    let mut train_indices = Vec::new();
    for class in [1i8, -1i8] {
        let mut indices: Vec<usize> = ds
            .examples()
            .iter()
            .enumerate()
            .filter(|(_, e)| e.label == class)
            .map(|(i, _)| i)
            .collect();
        if indices.is_empty() {
            return Err(Error::ClassAbsent { label: class });
        }
        indices.shuffle(&mut rng);
        let n_test = round_half_up(indices.len() as f64 * test_fraction);
        test_indices.extend_from_slice(&indices[..n_test]);
        train_indices.extend_from_slice(&indices[n_test..]);
    }
    if test_indices.is_empty() {
        return Err(Error::EmptySplit { side: "test" });
    }
    if train_indices.is_empty() {
        return Err(Error::EmptySplit { side: "train" });
    }
    test_indices.sort_unstable();
    train_indices.sort_unstable();
    Ok((ds.subset(&train_indices), ds.subset(&test_indices)))
}

/// Draws `ceil(fraction * n)` examples uniformly with replacement.
pub fn bootstrap_sample(ds: &Dataset, fraction: f64, seed: u64) -> Result<Dataset> {
    if ds.is_empty() {
        return Err(Error::EmptyDataset);
    }
    if !(fraction > 0.0 && fraction <= 1.0) {
        return Err(Error::InvalidParameter {
            name: "fraction",
            reason: format!("must be in (0, 1], got {fraction}"),
        });
    }
    let size = ceil_snapped(fraction * ds.len() as f64);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let indices: Vec<usize> = (0..size).map(|_| rng.random_range(0..ds.len())).collect();
    Ok(ds.subset(&indices))
}

/// Generates a two-class Gaussian dataset: positives from an isotropic unit
/// Gaussian at `+class_separation * (1,..,1)/sqrt(d)`, negatives at the
/// mirrored mean. Positive count is `round(imbalance_ratio * n)`.
pub fn make_synthetic(
    n: usize,
    d: usize,
    imbalance_ratio: f64,
    class_separation: f64,
    seed: u64,
) -> Result<Dataset> {
    if n == 0 {
        return Err(Error::EmptyDataset);
    }
    if d == 0 {
        return Err(Error::InvalidParameter {
            name: "d",
            reason: "dimension must be positive".to_string(),
        });
    }
    if !(imbalance_ratio > 0.0 && imbalance_ratio <= 0.5) {
        return Err(Error::InvalidParameter {
            name: "imbalance_ratio",
            reason: format!("must be in (0, 0.5], got {imbalance_ratio}"),
        });
    }
    if !class_separation.is_finite() || class_separation < 0.0 {
        return Err(Error::InvalidParameter {
            name: "class_separation",
            reason: format!("must be non-negative, got {class_separation}"),
        });
    }
    let n_pos = round_half_up(imbalance_ratio * n as f64);
    if n_pos == 0 {
        return Err(Error::InvalidParameter {
            name: "imbalance_ratio",
            reason: format!("round({imbalance_ratio} * {n}) yields zero positive examples"),
        });
    }

    let offset = class_separation / (d as f64).sqrt();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut examples = Vec::with_capacity(n);
    for i in 0..n {
        let label: i8 = if i < n_pos { 1 } else { -1 };
        let mean = if label == 1 { offset } else { -offset };
        let features: Vec<f64> = (0..d)
            .map(|_| mean + rng.sample::<f64, _>(StandardNormal))
            .collect();
        examples.push(Example { features, label });
    }
    examples.shuffle(&mut rng);
    Dataset::new(examples, d)
}

/// Duplicates minority examples uniformly with replacement until the class
/// counts are equal. The original examples are all retained.
pub fn random_oversample(ds: &Dataset, seed: u64) -> Result<Dataset> {
    let (minority, deficit) = minority_class(ds)?;
    if deficit == 0 {
        return Ok(ds.clone());
    }
    let minority_indices: Vec<usize> = ds
        .examples()
        .iter()
        .enumerate()
        .filter(|(_, e)| e.label == minority)
        .map(|(i, _)| i)
        .collect();

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut examples = ds.examples().to_vec();
    for _ in 0..deficit {
        let pick = minority_indices[rng.random_range(0..minority_indices.len())];
        examples.push(ds.examples()[pick].clone());
    }
    Dataset::new(examples, ds.dimension())
}

/// Oversamples the minority class with synthetic examples interpolated
/// between a minority example and one of its `k_neighbors` nearest minority
/// neighbors (exact Euclidean search), until the class counts are equal.
pub fn smote(ds: &Dataset, k_neighbors: usize, seed: u64) -> Result<Dataset> {
    if k_neighbors == 0 {
        return Err(Error::InvalidParameter {
            name: "k_neighbors",
            reason: "must be at least 1".to_string(),
        });
    }
    let (minority, deficit) = minority_class(ds)?;
    if deficit == 0 {
        return Ok(ds.clone());
    }
    let minority_points: Vec<&Example> = ds
        .examples()
        .iter()
        .filter(|e| e.label == minority)
        .collect();
    if minority_points.len() < 2 {
        return Err(Error::TooFewMinority {
            needed: 2,
            actual: minority_points.len(),
        });
    }

    let k_eff = k_neighbors.min(minority_points.len() - 1);
    let neighbors: Vec<Vec<usize>> = (0..minority_points.len())
        .map(|i| nearest_neighbors(&minority_points, i, k_eff))
        .collect();

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut examples = ds.examples().to_vec();
    for _ in 0..deficit {
        let base = rng.random_range(0..minority_points.len());
        let nn = neighbors[base][rng.random_range(0..k_eff)];
        let u: f64 = rng.random();
        let features: Vec<f64> = minority_points[base]
            .features
            .iter()
            .zip(&minority_points[nn].features)
            .map(|(&a, &b)| a + u * (b - a))
            .collect();
        examples.push(Example {
            features,
            label: minority,
        });
    }
    Dataset::new(examples, ds.dimension())
}

/// Default neighbor count for SMOTE.
pub const DEFAULT_SMOTE_NEIGHBORS: usize = 5;

fn nearest_neighbors(points: &[&Example], of: usize, k: usize) -> Vec<usize> {
    let mut dists: Vec<(f64, usize)> = points
        .iter()
        .enumerate()
        .filter(|(j, _)| *j != of)
        .map(|(j, p)| {
            let d2: f64 = points[of]
                .features
                .iter()
                .zip(&p.features)
                .map(|(&a, &b)| (a - b) * (a - b))
                .sum();
            (d2, j)
        })
        .collect();
    dists.sort_by(|a, b| a.partial_cmp(b).expect("finite distances"));
    dists.into_iter().take(k).map(|(_, j)| j).collect()
}

fn minority_class(ds: &Dataset) -> Result<(i8, usize)> {
    let pos = ds.positive_count();
    let neg = ds.negative_count();
    if pos == 0 {
        return Err(Error::ClassAbsent { label: 1 });
    }
    if neg == 0 {
        return Err(Error::ClassAbsent { label: -1 });
    }
    if pos <= neg {
        Ok((1, neg - pos))
    } else {
        Ok((-1, pos - neg))
    }
}

/// Moves the positive-class ratio to `target_ir` by randomly removing
/// examples from exactly one class: negatives when the target is above the
/// current ratio, positives when below.
pub fn subsample_to_ratio(ds: &Dataset, target_ir: f64, seed: u64) -> Result<Dataset> {
    if !(target_ir > 0.0 && target_ir <= 0.5) {
        return Err(Error::InvalidParameter {
            name: "target_ir",
            reason: format!("must be in (0, 0.5], got {target_ir}"),
        });
    }
    let pos = ds.positive_count();
    let neg = ds.negative_count();
    if pos == 0 {
        return Err(Error::ClassAbsent { label: 1 });
    }
    if neg == 0 {
        return Err(Error::ClassAbsent { label: -1 });
    }

    let current = ds.imbalance_ratio();
    let (class_to_cut, keep) = if target_ir > current {
        // p / (p + m') = t  =>  m' = p (1 - t) / t
        let keep = round_half_up(pos as f64 * (1.0 - target_ir) / target_ir).min(neg);
        (-1i8, keep)
    } else {
        // p' / (p' + m) = t  =>  p' = m t / (1 - t)
        let keep = round_half_up(neg as f64 * target_ir / (1.0 - target_ir)).min(pos);
        if keep == 0 {
            return Err(Error::UnachievableRatio { target: target_ir });
        }
        (1i8, keep)
    };

    let current_count = if class_to_cut == 1 { pos } else { neg };
    if keep == current_count {
        return Ok(ds.clone());
    }

    let mut cut_indices: Vec<usize> = ds
        .examples()
        .iter()
        .enumerate()
        .filter(|(_, e)| e.label == class_to_cut)
        .map(|(i, _)| i)
        .collect();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    cut_indices.shuffle(&mut rng);
    cut_indices.truncate(keep);

    let mut kept: Vec<usize> = ds
        .examples()
        .iter()
        .enumerate()
        .filter(|(_, e)| e.label != class_to_cut)
        .map(|(i, _)| i)
        .chain(cut_indices)
        .collect();
    kept.sort_unstable();
    Ok(ds.subset(&kept))
}
