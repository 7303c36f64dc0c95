//! Startup exit prediction pipeline.

pub mod cli;
pub mod features;
pub mod gbdt;
pub mod ingest;
pub mod llm;
pub mod metrics;
pub mod prompt;
pub mod synth;
pub mod tokens;
