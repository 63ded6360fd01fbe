//! CART-style binary decision trees: the base learner behind the ensemble.
//!
//! Splits minimize weighted Gini impurity over midpoint thresholds between
//! consecutive distinct feature values. Exact impurity ties break toward the
//! lowest feature index, then the lowest threshold, so fitting is fully
//! deterministic and invariant to example order.

use serde::{Deserialize, Serialize};

use crate::dataset::Dataset;
use crate::error::{Error, Result};

/// A fitted tree node: either a split or a leaf carrying the training-set
/// positive fraction it was built from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum TreeNode {
    Internal {
        feature_index: usize,
        threshold: f64,
        left: Box<TreeNode>,
        right: Box<TreeNode>,
    },
    Leaf {
        label: i8,
        positive_fraction: f64,
    },
}

impl TreeNode {
    /// Longest root-to-leaf path, in edges.
    pub fn depth(&self) -> usize {
        match self {
            TreeNode::Leaf { .. } => 0,
            TreeNode::Internal { left, right, .. } => 1 + left.depth().max(right.depth()),
        }
    }

    /// Checks the structural invariants, mainly for trees read from disk:
    /// leaf labels in {-1, +1} consistent with the positive fraction, and
    /// finite thresholds.
    pub fn validate(&self) -> Result<()> {
        match self {
            TreeNode::Leaf {
                label,
                positive_fraction,
            } => {
                if *label != -1 && *label != 1 {
                    return Err(Error::InvalidLabel {
                        value: *label as i64,
                    });
                }
                if !positive_fraction.is_finite() || !(0.0..=1.0).contains(positive_fraction) {
                    return Err(Error::ModelFormat {
                        reason: format!(
                            "leaf positive_fraction {positive_fraction} outside [0, 1]"
                        ),
                    });
                }
                let expected = if *positive_fraction >= 0.5 { 1 } else { -1 };
                if *label != expected {
                    return Err(Error::ModelFormat {
                        reason: format!(
                            "leaf label {label} inconsistent with positive_fraction {positive_fraction}"
                        ),
                    });
                }
                Ok(())
            }
            TreeNode::Internal {
                threshold,
                left,
                right,
                ..
            } => {
                if !threshold.is_finite() {
                    return Err(Error::ModelFormat {
                        reason: format!("non-finite split threshold {threshold}"),
                    });
                }
                left.validate()?;
                right.validate()
            }
        }
    }
}

/// Stopping criteria for tree growth. Defaults grow the tree fully.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TreeParams {
    /// Maximum depth in edges; `None` means unlimited.
    pub max_depth: Option<u32>,
    pub min_samples_split: usize,
    pub min_samples_leaf: usize,
}

impl Default for TreeParams {
    fn default() -> Self {
        Self {
            max_depth: None,
            min_samples_split: 2,
            min_samples_leaf: 1,
        }
    }
}

/// Fits a tree by greedy recursive partitioning. The tie rule makes fitting
/// deterministic; the seed is accepted for interface stability and unused.
pub fn fit_tree(ds: &Dataset, params: &TreeParams, _seed: u64) -> Result<TreeNode> {
    if ds.is_empty() {
        return Err(Error::EmptyDataset);
    }
    if params.min_samples_split < 2 {
        return Err(Error::InvalidParameter {
            name: "min_samples_split",
            reason: "must be at least 2".to_string(),
        });
    }
    if params.min_samples_leaf < 1 {
        return Err(Error::InvalidParameter {
            name: "min_samples_leaf",
            reason: "must be at least 1".to_string(),
        });
    }
    let indices: Vec<usize> = (0..ds.len()).collect();
    Ok(grow(ds, &indices, 0, params))
}

fn grow(ds: &Dataset, indices: &[usize], depth: u32, params: &TreeParams) -> TreeNode {
    let n = indices.len();
    let n_pos = indices
        .iter()
        .filter(|&&i| ds.examples()[i].label == 1)
        .count();

    let at_depth_limit = params.max_depth.is_some_and(|md| depth >= md);
    if n_pos == 0 || n_pos == n || at_depth_limit || n < params.min_samples_split {
        return leaf(n_pos, n);
    }

    let Some((feature_index, threshold)) = best_split(ds, indices, params.min_samples_leaf) else {
        return leaf(n_pos, n);
    };

    let (left_idx, right_idx): (Vec<usize>, Vec<usize>) = indices
        .iter()
        .partition(|&&i| ds.examples()[i].features[feature_index] <= threshold);
    TreeNode::Internal {
        feature_index,
        threshold,
        left: Box::new(grow(ds, &left_idx, depth + 1, params)),
        right: Box::new(grow(ds, &right_idx, depth + 1, params)),
    }
}

fn leaf(n_pos: usize, n: usize) -> TreeNode {
    let positive_fraction = n_pos as f64 / n as f64;
    TreeNode::Leaf {
        label: if positive_fraction >= 0.5 { 1 } else { -1 },
        positive_fraction,
    }
}

/// Scans every (feature, midpoint-threshold) candidate and returns the one
/// with the lowest weighted Gini impurity, or `None` if no candidate
/// respects `min_samples_leaf` or all feature values are constant.
fn best_split(ds: &Dataset, indices: &[usize], min_samples_leaf: usize) -> Option<(usize, f64)> {
    let n = indices.len();
    let mut best: Option<(f64, usize, f64)> = None;

    for feature in 0..ds.dimension() {
        let mut pairs: Vec<(f64, i8)> = indices
            .iter()
            .map(|&i| {
                let ex = &ds.examples()[i];
                (ex.features[feature], ex.label)
            })
            .collect();
        pairs.sort_unstable_by(|a, b| a.0.total_cmp(&b.0));
        let pos_total = pairs.iter().filter(|p| p.1 == 1).count();

        let mut pos_left = 0usize;
        for cut in 1..n {
            if pairs[cut - 1].1 == 1 {
                pos_left += 1;
            }
            if pairs[cut - 1].0 >= pairs[cut].0 {
                continue;
            }
            if cut < min_samples_leaf || n - cut < min_samples_leaf {
                continue;
            }
            let impurity = weighted_gini(pos_left, cut, pos_total - pos_left, n - cut);
            let lo = pairs[cut - 1].0;
            let hi = pairs[cut].0;
            let mut threshold = lo + (hi - lo) / 2.0;
            if threshold >= hi {
                threshold = lo;
            }
            let candidate_is_better = match best {
                None => true,
                Some((best_imp, _, _)) => impurity < best_imp,
            };
            if candidate_is_better {
                best = Some((impurity, feature, threshold));
            }
        }
    }
    best.map(|(_, f, t)| (f, t))
}

fn weighted_gini(pos_left: usize, n_left: usize, pos_right: usize, n_right: usize) -> f64 {
    let n = (n_left + n_right) as f64;
    (n_left as f64 * gini(pos_left, n_left) + n_right as f64 * gini(pos_right, n_right)) / n
}

fn gini(n_pos: usize, n: usize) -> f64 {
    let p = n_pos as f64 / n as f64;
    2.0 * p * (1.0 - p)
}

/// Routes a feature vector to a leaf; `x[feature] <= threshold` goes left.
pub fn predict_tree(tree: &TreeNode, x: &[f64]) -> Result<i8> {
    let mut node = tree;
    loop {
        match node {
            TreeNode::Leaf { label, .. } => return Ok(*label),
            TreeNode::Internal {
                feature_index,
                threshold,
                left,
                right,
            } => {
                let value = x.get(*feature_index).ok_or(Error::DimensionMismatch {
                    expected: feature_index + 1,
                    actual: x.len(),
                })?;
                node = if *value <= *threshold { left } else { right };
            }
        }
    }
}
