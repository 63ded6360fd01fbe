//! End-to-end training: bag K trees, up-weight the hard positives under the
//! uniform vote, then learn the classifier weights by maximizing the C-bound
//! objective on the reweighted sample.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::cbound::{
    disagreement_matrix, expected_disagreement, gibbs_risk, optimize_weights, risk_vector,
    ExampleDistribution, OptimizeOutcome, OptimizerConfig, OptimizerStatus, DENOMINATOR_GUARD,
};
use crate::dataset::{bootstrap_sample, Dataset};
use crate::error::{Error, Result};
use crate::tree::{fit_tree, TreeNode, TreeParams};
use crate::vote::{vote_matrix, Ensemble, PosteriorWeights, VoteMatrix};

/// Derives an independent child seed from a base seed and a stream index
/// (SplitMix64 finalizer). Stream `i` is stable no matter how many other
/// streams are drawn, so growing K never reshuffles earlier bootstraps.
pub fn derive_seed(base: u64, stream: u64) -> u64 {
    let mut z = base.wrapping_add((stream.wrapping_add(1)).wrapping_mul(0x9E37_79B9_7F4A_7C15));
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

// Purpose tags for seed sub-streams.
const STREAM_BOOTSTRAP: u64 = 0;
const STREAM_OPTIMIZER: u64 = 1;

/// Training configuration: K classifiers on bootstraps of the given
/// fraction, with tree and optimizer settings.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DamviConfig {
    pub k: usize,
    pub bootstrap_fraction: f64,
    pub tree_params: TreeParams,
    pub optimizer: OptimizerConfig,
    pub seed: u64,
}

impl Default for DamviConfig {
    fn default() -> Self {
        Self {
            k: 100,
            bootstrap_fraction: 0.2,
            tree_params: TreeParams::default(),
            optimizer: OptimizerConfig::default(),
            seed: 0,
        }
    }
}

/// Summary of a training run, serialized alongside the model.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainingReport {
    pub cbound: f64,
    pub gibbs_risk: f64,
    pub disagreement: f64,
    pub optimizer_iterations: usize,
    pub bound_applicable: bool,
}

/// Everything a training run produces.
#[derive(Debug, Clone)]
pub struct TrainOutput {
    pub ensemble: Ensemble,
    pub report: TrainingReport,
    pub optimizer: OptimizeOutcome,
}

/// One pass of the example-weight update: each positive example's weight is
/// multiplied by `exp(-margin)` under the current vote, negatives keep their
/// weight, and the result is renormalized. Misclassified positives (negative
/// margin) gain weight; well-classified ones lose it.
pub fn update_example_weights(
    dist: &ExampleDistribution,
    v: &VoteMatrix,
    q: &PosteriorWeights,
) -> Result<ExampleDistribution> {
    if dist.len() != v.n() {
        return Err(Error::LengthMismatch {
            left: dist.len(),
            right: v.n(),
        });
    }
    if q.len() != v.k() {
        return Err(Error::LengthMismatch {
            left: q.len(),
            right: v.k(),
        });
    }
    let mut unnormalized = Vec::with_capacity(v.n());
    for (i, &w) in dist.as_slice().iter().enumerate() {
        let updated = if v.label(i) == 1 {
            w * (-v.margin(i, q)).exp()
        } else {
            w
        };
        unnormalized.push(updated);
    }
    let z: f64 = unnormalized.iter().sum();
    if z <= 0.0 || !z.is_finite() {
        return Err(Error::InvalidDistribution {
            reason: format!("normalization factor {z} after weight update"),
        });
    }
    ExampleDistribution::new(unnormalized.into_iter().map(|w| w / z).collect())
}

fn validate_config(train: &Dataset, config: &DamviConfig) -> Result<()> {
    if config.k == 0 {
        return Err(Error::InvalidParameter {
            name: "k",
            reason: "need at least one classifier".to_string(),
        });
    }
    if train.positive_count() == 0 {
        return Err(Error::ClassAbsent { label: 1 });
    }
    if train.negative_count() == 0 {
        return Err(Error::ClassAbsent { label: -1 });
    }
    Ok(())
}

/// Fits K trees on seeded bootstraps, in parallel. Both the full training
/// procedure and the uniform-bagging ablation share this, so the two see
/// identical classifier sets for a given config.
fn fit_bagged_trees(train: &Dataset, config: &DamviConfig) -> Result<Vec<TreeNode>> {
    let boot_base = derive_seed(config.seed, STREAM_BOOTSTRAP);
    (0..config.k)
        .into_par_iter()
        .map(|j| {
            let seed = derive_seed(boot_base, j as u64);
            let sample = bootstrap_sample(train, config.bootstrap_fraction, seed)?;
            fit_tree(&sample, &config.tree_params, seed)
        })
        .collect()
}

/// Trains the full pipeline: bagging, one hard-positive weight update under
/// the uniform vote, then C-bound weight optimization on the reweighted
/// sample. Votes for the update and the optimization are taken on the full
/// training set.
pub fn train_damvi(train: &Dataset, config: &DamviConfig) -> Result<TrainOutput> {
    validate_config(train, config)?;
    let trees = fit_bagged_trees(train, config)?;

    let uniform_q = PosteriorWeights::uniform(config.k)?;
    let votes = vote_matrix(&trees, train)?;
    let initial = ExampleDistribution::uniform(train.len())?;
    let updated = update_example_weights(&initial, &votes, &uniform_q)?;

    let risks = risk_vector(&votes, &updated)?;
    let disagreements = disagreement_matrix(&votes, &updated)?;
    let mut optimizer_config = config.optimizer.clone();
    optimizer_config.seed = derive_seed(config.seed, STREAM_OPTIMIZER);
    let outcome = optimize_weights(&risks, &disagreements, &uniform_q, &optimizer_config)?;

    let gibbs = gibbs_risk(&outcome.weights, &risks)?;
    let disagreement = expected_disagreement(&outcome.weights, &disagreements)?;
    let bound_applicable = outcome.status != OptimizerStatus::DegenerateDenominator
        && gibbs <= 0.5
        && (1.0 - 2.0 * disagreement) >= DENOMINATOR_GUARD
        && outcome.cbound.is_finite();

    let report = TrainingReport {
        cbound: outcome.cbound,
        gibbs_risk: gibbs,
        disagreement,
        optimizer_iterations: outcome.iterations,
        bound_applicable,
    };
    let ensemble = Ensemble::new(trees, outcome.weights.clone())?;
    Ok(TrainOutput {
        ensemble,
        report,
        optimizer: outcome,
    })
}

/// Ablation baseline: the same bagged classifiers with the weights left
/// uniform.
pub fn train_uniform_bagging(train: &Dataset, config: &DamviConfig) -> Result<Ensemble> {
    validate_config(train, config)?;
    let trees = fit_bagged_trees(train, config)?;
    Ensemble::new(trees, PosteriorWeights::uniform(config.k)?)
}
