//! Corpus statistics: class balance, description-length histogram and
//! per-feature summaries.

use serde::Serialize;

use super::profile::{AgeSource, CompanyProfile, FEATURE_NAMES};
use crate::tokens::TokenCounter;

/// Upper bounds (inclusive) of the description-length buckets. The final
/// bucket is open-ended.
pub const LENGTH_BUCKET_UPPER: [usize; 9] = [0, 8, 16, 32, 64, 128, 256, 512, 1024];

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LengthBucket {
    pub label: String,
    pub lo: usize,
    /// `None` for the open-ended last bucket.
    pub hi: Option<usize>,
    pub count: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Summary {
    pub min: f64,
    pub median: f64,
    pub max: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FeatureSummary {
    pub name: String,
    pub min: f64,
    pub median: f64,
    pub max: f64,
    /// Share of companies whose value is an imputed default.
    pub missing_rate: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CorpusStats {
    pub companies: usize,
    pub positives: usize,
    pub negatives: usize,
    pub positive_ratio: f64,
    pub description_tokens: Summary,
    pub description_histogram: Vec<LengthBucket>,
    pub features: Vec<FeatureSummary>,
}

fn summarize(mut values: Vec<f64>) -> Summary {
    if values.is_empty() {
        return Summary {
            min: 0.0,
            median: 0.0,
            max: 0.0,
        };
    }
    values.sort_by(f64::total_cmp);
    let n = values.len();
    let median = if n % 2 == 1 {
        values[n / 2]
    } else {
        (values[n / 2 - 1] + values[n / 2]) / 2.0
    };
    Summary {
        min: values[0],
        median,
        max: values[n - 1],
    }
}

fn bucket_index(tokens: usize) -> usize {
    LENGTH_BUCKET_UPPER
        .iter()
        .position(|&hi| tokens <= hi)
        .unwrap_or(LENGTH_BUCKET_UPPER.len())
}

fn empty_histogram() -> Vec<LengthBucket> {
    let mut out = Vec::with_capacity(LENGTH_BUCKET_UPPER.len() + 1);
    let mut lo = 0;
    for &hi in &LENGTH_BUCKET_UPPER {
        let label = if lo == hi { format!("{hi}") } else { format!("{lo}-{hi}") };
        out.push(LengthBucket {
            label,
            lo,
            hi: Some(hi),
            count: 0,
        });
        lo = hi + 1;
    }
    out.push(LengthBucket {
        label: format!("{lo}+"),
        lo,
        hi: None,
        count: 0,
    });
    out
}

pub fn corpus_stats(profiles: &[CompanyProfile], counter: &dyn TokenCounter) -> CorpusStats {
    let n = profiles.len();
    let positives = profiles.iter().filter(|p| p.success == 1).count();

    let mut histogram = empty_histogram();
    let lengths: Vec<usize> = profiles.iter().map(|p| counter.count(&p.description)).collect();
    for &len in &lengths {
        histogram[bucket_index(len)].count += 1;
    }

    let rate = |k: usize| if n == 0 { 0.0 } else { k as f64 / n as f64 };
    let features = FEATURE_NAMES
        .iter()
        .enumerate()
        .map(|(i, name)| {
            let s = summarize(profiles.iter().map(|p| p.feature_vector()[i]).collect());
            let missing = match i {
                0 => profiles
                    .iter()
                    .filter(|p| matches!(p.age_source, AgeSource::Missing | AgeSource::FutureDate))
                    .count(),
                1 => profiles.iter().filter(|p| p.raised_imputed).count(),
                _ => 0,
            };
            FeatureSummary {
                name: (*name).to_string(),
                min: s.min,
                median: s.median,
                max: s.max,
                missing_rate: rate(missing),
            }
        })
        .collect();

    CorpusStats {
        companies: n,
        positives,
        negatives: n - positives,
        positive_ratio: rate(positives),
        description_tokens: summarize(lengths.iter().map(|&l| l as f64).collect()),
        description_histogram: histogram,
        features,
    }
}
