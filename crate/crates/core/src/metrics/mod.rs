//! Classification metrics and BERTScore.

mod bertscore;
mod classification;
mod embeddings;

use std::fmt::Write as _;

use thiserror::Error;

pub use bertscore::{bertscore, compute_idf, BertScoreResult, TokenEmbeddings};
pub use classification::{
    classification_report, confusion, report, ClassSupport, ClassificationReport, ConfusionMatrix,
};
pub use embeddings::{
    CachingProvider, EmbeddingProvider, FixtureProvider, HttpEmbeddingProvider,
};

#[derive(Debug, Error, PartialEq)]
pub enum MetricsError {
    #[error("length mismatch: {left} predictions vs {right} labels")]
    LengthMismatch { left: usize, right: usize },
    #[error("nothing to score")]
    Empty,
    #[error("value at index {0} is not 0 or 1")]
    NotBinary(usize),
    #[error("embedding dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("zero-norm embedding vector at row {0}")]
    ZeroNorm(usize),
    #[error("embeddings: {0}")]
    Embedding(String),
    #[error("embedding provider: {0}")]
    Provider(String),
}

/// Mean BERTScore over aligned candidate/reference pairs.
pub fn mean_bertscore(pairs: &[BertScoreResult]) -> Option<BertScoreResult> {
    if pairs.is_empty() {
        return None;
    }
    let n = pairs.len() as f64;
    Some(BertScoreResult {
        precision: pairs.iter().map(|p| p.precision).sum::<f64>() / n,
        recall: pairs.iter().map(|p| p.recall).sum::<f64>() / n,
        f1: pairs.iter().map(|p| p.f1).sum::<f64>() / n,
        idf_used: pairs.iter().all(|p| p.idf_used),
    })
}

/// Aligned two-column text rendering of a report, with the confusion counts.
pub fn render_report_text(report: &ClassificationReport, bert: Option<&BertScoreResult>) -> String {
    let mut rows: Vec<(&str, String)> = vec![
        ("accuracy", format!("{:.4}", report.accuracy)),
        ("precision", format!("{:.4}", report.precision)),
        ("recall", format!("{:.4}", report.recall)),
        ("f1_positive", format!("{:.4}", report.f1_positive)),
        ("f1_macro", format!("{:.4}", report.f1_macro)),
        ("support_positive", report.support.positive.to_string()),
        ("support_negative", report.support.negative.to_string()),
        ("tp", report.confusion.tp.to_string()),
        ("fp", report.confusion.fp.to_string()),
        ("tn", report.confusion.tn.to_string()),
        ("fn", report.confusion.fn_.to_string()),
    ];
    if let Some(b) = bert {
        rows.push(("bertscore_precision", format!("{:.4}", b.precision)));
        rows.push(("bertscore_recall", format!("{:.4}", b.recall)));
        rows.push(("bertscore_f1", format!("{:.4}", b.f1)));
    }
    let width = rows.iter().map(|(k, _)| k.len()).max().unwrap_or(0);
    let mut out = String::new();
    for (k, v) in rows {
        let _ = writeln!(out, "{k:<width$}  {v:>10}");
    }
    out
}
