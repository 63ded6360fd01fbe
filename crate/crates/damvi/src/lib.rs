//! Diversity-aware weighted majority votes for imbalanced binary
//! classification.
//!
//! The pipeline bags decision-tree base learners, up-weights the positive
//! (minority) examples the uniform vote finds hard, and then learns the
//! weights over the classifiers by maximizing a PAC-Bayesian C-bound
//! objective that trades the classifiers' accuracy against their pairwise
//! diversity. The crate also ships the resampling baselines (random
//! oversampling, SMOTE, balanced undersampling), imbalance-aware metrics
//! (F1, precision-recall, average precision), and the Wilcoxon rank-sum
//! test used when comparing methods.
//!
//! The main entry points are [`train::train_damvi`] and
//! [`train::train_uniform_bagging`]; see the `damvi-cli` crate for the
//! command-line experiment harness.

pub mod cbound;
pub mod dataset;
pub mod error;
pub mod metrics;
pub mod train;
pub mod tree;
pub mod vote;

pub use error::{Error, Result};
