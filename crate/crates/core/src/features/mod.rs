//! Feature engineering: per-company profiles, the success label, corpus
//! statistics, class balancing and splits.

mod export;
mod profile;
mod sampling;
mod stats;

use chrono::NaiveDate;
use thiserror::Error;

pub use export::{read_profiles_jsonl, write_profiles_csv, write_profiles_jsonl};
pub use profile::{
    compute_age, default_reference_date, derive_all, derive_label, derive_profile, AgeSource,
    CompanyProfile, ExecutiveTitles, AGE_UNKNOWN, DAYS_PER_YEAR, DEFAULT_EXECUTIVE_KEYWORDS,
    FEATURE_NAMES,
};
pub use sampling::{apportion, balance_dataset, split, Labeled, SplitSpec, Splits};
pub(crate) use sampling::{draw, rng};
pub use stats::{corpus_stats, CorpusStats, FeatureSummary, LengthBucket, Summary, LENGTH_BUCKET_UPPER};

#[derive(Debug, Error, PartialEq)]
pub enum FeatureError {
    #[error("founding date {date} lies after the reference date {reference}")]
    FutureDate { date: NaiveDate, reference: NaiveDate },
    #[error("class {class} has no members")]
    EmptyClass { class: u8 },
    #[error("corpus of {0} companies is too small to split (need at least 3)")]
    CorpusTooSmall(usize),
    #[error("split ratios {0:?} must be positive and sum to 1")]
    BadRatios([f64; 3]),
}
