//! Workplace location choice modeling over large zone choice sets.
//!
//! The crate estimates and compares two families of destination choice
//! models on the same data: a 2-level nested-logit model with an occupation
//! logsum, and a feed-forward neural choice model with per-zone
//! alternative-specific constants. Around them it provides synthetic data
//! generation (city, population, accessibility, simulated choices), shared
//! optimizers, and the comparison statistics used to judge the two model
//! families against held-out data.

pub mod domain;
pub mod error;
pub mod io;
pub mod linalg;
pub mod metrics;
pub mod model;
pub mod nested_logit;
pub mod neural;
pub mod optim;
pub mod pipeline;
pub mod prob;
pub mod report;
pub mod rng;
pub mod special;
pub mod synthgen;

pub use domain::{
    build_dataset, split_dataset, zone_distance, AccessibilityMatrix, Dataset, DatasetView,
    Individual, Zone, OCCUPATION_COUNT, OCCUPATION_NAMES,
};
pub use error::{Error, Result};
pub use prob::{log_sum_exp, softmax, ChoiceProbabilities};
