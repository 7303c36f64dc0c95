//! Confusion counts and the derived classification report.

use serde::{Deserialize, Serialize};

use super::MetricsError;

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConfusionMatrix {
    pub tp: u64,
    pub fp: u64,
    pub tn: u64,
    #[serde(rename = "fn")]
    pub fn_: u64,
}

impl ConfusionMatrix {
    pub fn total(&self) -> u64 {
        self.tp + self.fp + self.tn + self.fn_
    }

    pub fn add(&mut self, pred: u8, label: u8) {
        match (pred != 0, label != 0) {
            (true, true) => self.tp += 1,
            (true, false) => self.fp += 1,
            (false, false) => self.tn += 1,
            (false, true) => self.fn_ += 1,
        }
    }
}

pub fn confusion(preds: &[u8], labels: &[u8]) -> Result<ConfusionMatrix, MetricsError> {
    if preds.len() != labels.len() {
        return Err(MetricsError::LengthMismatch {
            left: preds.len(),
            right: labels.len(),
        });
    }
    if preds.is_empty() {
        return Err(MetricsError::Empty);
    }
    if let Some(i) = preds.iter().chain(labels).position(|&v| v > 1) {
        let i = if i < preds.len() { i } else { i - preds.len() };
        return Err(MetricsError::NotBinary(i));
    }
    let mut cm = ConfusionMatrix::default();
    for (&p, &l) in preds.iter().zip(labels) {
        cm.add(p, l);
    }
    Ok(cm)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ClassSupport {
    pub positive: u64,
    pub negative: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassificationReport {
    pub accuracy: f64,
    pub precision: f64,
    pub recall: f64,
    pub f1_positive: f64,
    pub f1_macro: f64,
    pub support: ClassSupport,
    pub confusion: ConfusionMatrix,
}

/// `num / den`, or 0 when the denominator vanishes.
fn ratio(num: u64, den: u64) -> f64 {
    if den == 0 {
        0.0
    } else {
        num as f64 / den as f64
    }
}

fn harmonic(p: f64, r: f64) -> f64 {
    if p + r == 0.0 {
        0.0
    } else {
        2.0 * p * r / (p + r)
    }
}

/// F1 of one class given its true positives, false positives and misses.
fn f1_for(tp: u64, fp: u64, miss: u64) -> f64 {
    harmonic(ratio(tp, tp + fp), ratio(tp, tp + miss))
}

pub fn report(cm: &ConfusionMatrix) -> Result<ClassificationReport, MetricsError> {
    if cm.total() == 0 {
        return Err(MetricsError::Empty);
    }
    let precision = ratio(cm.tp, cm.tp + cm.fp);
    let recall = ratio(cm.tp, cm.tp + cm.fn_);
    let f1_pos = harmonic(precision, recall);
    // negative class as the positive one: tn plays tp, fn plays fp
    let f1_neg = f1_for(cm.tn, cm.fn_, cm.fp);
    Ok(ClassificationReport {
        accuracy: ratio(cm.tp + cm.tn, cm.total()),
        precision,
        recall,
        f1_positive: f1_pos,
        f1_macro: (f1_pos + f1_neg) / 2.0,
        support: ClassSupport {
            positive: cm.tp + cm.fn_,
            negative: cm.tn + cm.fp,
        },
        confusion: *cm,
    })
}

pub fn classification_report(preds: &[u8], labels: &[u8]) -> Result<ClassificationReport, MetricsError> {
    report(&confusion(preds, labels)?)
}
