//! Weighted majority votes: posterior weights over base classifiers, the
//! precomputed vote matrix, and ensemble prediction.

use serde::{Deserialize, Serialize};

use crate::cbound::ExampleDistribution;
use crate::dataset::Dataset;
use crate::error::{Error, Result};
use crate::tree::{predict_tree, TreeNode};

/// Serialized ensemble format version.
pub const ENSEMBLE_FORMAT_VERSION: u32 = 1;

/// A distribution over the K base classifiers: non-negative weights summing
/// to one within 1e-9.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<f64>", into = "Vec<f64>")]
pub struct PosteriorWeights(Vec<f64>);

impl PosteriorWeights {
    pub fn new(q: Vec<f64>) -> Result<Self> {
        if q.is_empty() {
            return Err(Error::InvalidDistribution {
                reason: "empty weight vector".to_string(),
            });
        }
        let mut sum = 0.0;
        for &w in &q {
            if !w.is_finite() || w < 0.0 {
                return Err(Error::InvalidDistribution {
                    reason: format!("weight {w} is negative or not finite"),
                });
            }
            sum += w;
        }
        if (sum - 1.0).abs() > 1e-9 {
            return Err(Error::InvalidDistribution {
                reason: format!("weights sum to {sum}, expected 1"),
            });
        }
        Ok(Self(q))
    }

    pub fn uniform(k: usize) -> Result<Self> {
        if k == 0 {
            return Err(Error::InvalidDistribution {
                reason: "cannot build a distribution over zero classifiers".to_string(),
            });
        }
        Ok(Self(vec![1.0 / k as f64; k]))
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }
}

impl TryFrom<Vec<f64>> for PosteriorWeights {
    type Error = Error;

    fn try_from(q: Vec<f64>) -> Result<Self> {
        Self::new(q)
    }
}

impl From<PosteriorWeights> for Vec<f64> {
    fn from(w: PosteriorWeights) -> Self {
        w.0
    }
}

/// Precomputed votes `H[i][k]` of K classifiers on n examples, together with
/// the example labels. Entries are exactly -1 or +1.
#[derive(Debug, Clone, PartialEq)]
pub struct VoteMatrix {
    votes: Vec<i8>, // row-major, n * k
    n: usize,
    k: usize,
    labels: Vec<i8>,
}

impl VoteMatrix {
    /// Builds a matrix from per-example vote rows and labels.
    pub fn from_rows(rows: Vec<Vec<i8>>, labels: Vec<i8>) -> Result<Self> {
        if rows.is_empty() {
            return Err(Error::EmptyDataset);
        }
        if rows.len() != labels.len() {
            return Err(Error::LengthMismatch {
                left: rows.len(),
                right: labels.len(),
            });
        }
        let k = rows[0].len();
        if k == 0 {
            return Err(Error::InvalidVote);
        }
        let mut votes = Vec::with_capacity(rows.len() * k);
        for row in &rows {
            if row.len() != k {
                return Err(Error::LengthMismatch {
                    left: k,
                    right: row.len(),
                });
            }
            for &v in row {
                if v != -1 && v != 1 {
                    return Err(Error::InvalidVote);
                }
                votes.push(v);
            }
        }
        for &y in &labels {
            if y != -1 && y != 1 {
                return Err(Error::InvalidLabel { value: y as i64 });
            }
        }
        Ok(Self {
            votes,
            n: labels.len(),
            k,
            labels,
        })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn vote(&self, example: usize, classifier: usize) -> i8 {
        self.votes[example * self.k + classifier]
    }

    pub fn label(&self, example: usize) -> i8 {
        self.labels[example]
    }

    pub fn labels(&self) -> &[i8] {
        &self.labels
    }

    /// Q-weighted vote score of one example, in [-1, 1].
    pub fn score(&self, example: usize, q: &PosteriorWeights) -> f64 {
        let row = &self.votes[example * self.k..(example + 1) * self.k];
        row.iter()
            .zip(q.as_slice())
            .map(|(&v, &w)| w * v as f64)
            .sum()
    }

    /// Margin `y_i * score_i` of one example.
    pub fn margin(&self, example: usize, q: &PosteriorWeights) -> f64 {
        self.labels[example] as f64 * self.score(example, q)
    }
}

/// Evaluates every classifier on every example of a dataset.
pub fn vote_matrix(classifiers: &[TreeNode], ds: &Dataset) -> Result<VoteMatrix> {
    if classifiers.is_empty() {
        return Err(Error::InvalidVote);
    }
    if ds.is_empty() {
        return Err(Error::EmptyDataset);
    }
    let mut rows = Vec::with_capacity(ds.len());
    for ex in ds.examples() {
        let mut row = Vec::with_capacity(classifiers.len());
        for tree in classifiers {
            row.push(predict_tree(tree, &ex.features)?);
        }
        rows.push(row);
    }
    VoteMatrix::from_rows(rows, ds.labels())
}

/// K classifiers plus their posterior weights: the deployable majority vote.
#[derive(Debug, Clone, PartialEq)]
pub struct Ensemble {
    classifiers: Vec<TreeNode>,
    weights: PosteriorWeights,
}

#[derive(Serialize, Deserialize)]
struct EnsembleFile {
    format_version: u32,
    classifiers: Vec<TreeNode>,
    weights: PosteriorWeights,
}

impl Ensemble {
    pub fn new(classifiers: Vec<TreeNode>, weights: PosteriorWeights) -> Result<Self> {
        if classifiers.is_empty() {
            return Err(Error::InvalidParameter {
                name: "classifiers",
                reason: "ensemble needs at least one classifier".to_string(),
            });
        }
        if classifiers.len() != weights.len() {
            return Err(Error::LengthMismatch {
                left: classifiers.len(),
                right: weights.len(),
            });
        }
        for tree in &classifiers {
            tree.validate()?;
        }
        Ok(Self {
            classifiers,
            weights,
        })
    }

    pub fn classifiers(&self) -> &[TreeNode] {
        &self.classifiers
    }

    pub fn weights(&self) -> &PosteriorWeights {
        &self.weights
    }

    pub fn k(&self) -> usize {
        self.classifiers.len()
    }

    /// Serializes to versioned JSON.
    pub fn to_json_string(&self) -> Result<String> {
        let file = EnsembleFile {
            format_version: ENSEMBLE_FORMAT_VERSION,
            classifiers: self.classifiers.clone(),
            weights: self.weights.clone(),
        };
        Ok(serde_json::to_string_pretty(&file)?)
    }

    /// Parses versioned JSON, validating the format version and invariants.
    pub fn from_json_str(json: &str) -> Result<Self> {
        let file: EnsembleFile = serde_json::from_str(json)?;
        if file.format_version != ENSEMBLE_FORMAT_VERSION {
            return Err(Error::ModelFormat {
                reason: format!(
                    "unsupported format version {}, expected {}",
                    file.format_version, ENSEMBLE_FORMAT_VERSION
                ),
            });
        }
        Ensemble::new(file.classifiers, file.weights)
    }
}

/// Q-weighted average vote on one input, in [-1, 1].
pub fn ensemble_score(e: &Ensemble, x: &[f64]) -> Result<f64> {
    let mut score = 0.0;
    for (tree, &w) in e.classifiers.iter().zip(e.weights.as_slice()) {
        score += w * predict_tree(tree, x)? as f64;
    }
    Ok(score)
}

/// Majority-vote label: the sign of the score, with zero mapping to +1.
pub fn predict_mv(e: &Ensemble, x: &[f64]) -> Result<i8> {
    Ok(sign_with_tie(ensemble_score(e, x)?))
}

fn sign_with_tie(score: f64) -> i8 {
    if score >= 0.0 {
        1
    } else {
        -1
    }
}

/// Weighted 0/1 risk of the majority vote on a dataset. `None` weighs
/// examples uniformly.
pub fn empirical_mv_risk(
    e: &Ensemble,
    ds: &Dataset,
    dist: Option<&ExampleDistribution>,
) -> Result<f64> {
    if let Some(d) = dist {
        if d.len() != ds.len() {
            return Err(Error::LengthMismatch {
                left: d.len(),
                right: ds.len(),
            });
        }
    }
    let mut risk = 0.0;
    for (i, ex) in ds.examples().iter().enumerate() {
        if predict_mv(e, &ex.features)? != ex.label {
            risk += match dist {
                Some(d) => d.as_slice()[i],
                None => 1.0 / ds.len() as f64,
            };
        }
    }
    Ok(risk)
}

/// Weighted 0/1 risk of the majority vote evaluated from a vote matrix.
pub fn mv_risk(
    v: &VoteMatrix,
    q: &PosteriorWeights,
    dist: Option<&ExampleDistribution>,
) -> Result<f64> {
    if q.len() != v.k() {
        return Err(Error::LengthMismatch {
            left: q.len(),
            right: v.k(),
        });
    }
    if let Some(d) = dist {
        if d.len() != v.n() {
            return Err(Error::LengthMismatch {
                left: d.len(),
                right: v.n(),
            });
        }
    }
    let mut risk = 0.0;
    for i in 0..v.n() {
        if sign_with_tie(v.score(i, q)) != v.label(i) {
            risk += match dist {
                Some(d) => d.as_slice()[i],
                None => 1.0 / v.n() as f64,
            };
        }
    }
    Ok(risk)
}
