//! Synthetic Crunchbase-style corpora with a known success mechanism.
//!
//! Companies get six features drawn from simple parametric distributions.
//! A latent score `beta . z + b` over the standardized features decides the
//! label, either by sign or by a logistic draw. Positives are realized as
//! an IPO row or as the bought side of an acquisition row. The buyer of each
//! acquisition is another synthetic company whose acquisition count was
//! part of its own features.

mod config;
mod generate;
mod mechanism;

use thiserror::Error;

pub use config::{FeatureParams, MissingRates, NoiseMode, SynthConfig};
pub use generate::{
    generate, read_ground_truth, synthesize, write_ground_truth, GroundTruthRow, SynthCorpus, SynthSummary,
    GROUND_TRUTH_FILE,
};
pub use mechanism::{
    estimate_bayes_accuracy, feature_moments, resolved_intercept, standardize, BayesEstimate, MIN_MC_SAMPLES,
};

#[derive(Debug, Error, PartialEq)]
pub enum SynthError {
    #[error("invalid synth config: {0}")]
    Config(String),
    #[error("{0}")]
    Io(String),
}
