//! Class-balanced few-shot subsets.

use super::render::SftRecord;
use super::PromptError;
use crate::features::{draw, rng, Labeled};

/// Draws exactly `k` records with class counts equal within one. When `k` is
/// odd the larger class (negatives on a tie) takes the extra record. The
/// result keeps the input order.
pub fn sample_fewshot(records: &[SftRecord], k: usize, seed: u64) -> Result<Vec<SftRecord>, PromptError> {
    if k > records.len() {
        return Err(PromptError::FewShot(format!(
            "requested {k} records but only {} are available",
            records.len()
        )));
    }
    let (mut pos, mut neg) = (Vec::new(), Vec::new());
    for (i, r) in records.iter().enumerate() {
        if r.label() == 1 {
            pos.push(i);
        } else {
            neg.push(i);
        }
    }
    let half = k / 2;
    let (k_pos, k_neg) = if k % 2 == 0 {
        (half, half)
    } else if pos.len() > neg.len() {
        (half + 1, half)
    } else {
        (half, half + 1)
    };
    for (name, have, need) in [("positive", pos.len(), k_pos), ("negative", neg.len(), k_neg)] {
        if have < need {
            return Err(PromptError::FewShot(format!(
                "{name} class has {have} records, {need} needed for k={k}"
            )));
        }
    }
    let mut rng = rng(seed);
    let mut chosen = draw(&pos, k_pos, &mut rng);
    chosen.extend(draw(&neg, k_neg, &mut rng));
    chosen.sort_unstable();
    Ok(chosen.into_iter().map(|i| records[i].clone()).collect())
}
