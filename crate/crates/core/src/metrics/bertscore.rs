//! Greedy-matching BERTScore over externally supplied token embeddings.

use std::collections::{BTreeSet, HashMap};

use serde::{Deserialize, Serialize};

use super::MetricsError;

/// Per-token embeddings of one text, with optional idf weight per token.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TokenEmbeddings {
    pub tokens: Vec<String>,
    pub vectors: Vec<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub idf: Option<Vec<f64>>,
}

impl TokenEmbeddings {
    pub fn new(tokens: Vec<String>, vectors: Vec<Vec<f64>>) -> Result<Self, MetricsError> {
        let e = TokenEmbeddings {
            tokens,
            vectors,
            idf: None,
        };
        e.validate()?;
        Ok(e)
    }

    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.vectors.first().map_or(0, Vec::len)
    }

    pub fn validate(&self) -> Result<(), MetricsError> {
        if self.tokens.is_empty() {
            return Err(MetricsError::Empty);
        }
        if self.vectors.len() != self.tokens.len() {
            return Err(MetricsError::Embedding(format!(
                "{} tokens but {} vectors",
                self.tokens.len(),
                self.vectors.len()
            )));
        }
        let dim = self.dim();
        if dim == 0 {
            return Err(MetricsError::Embedding("empty vectors".into()));
        }
        for (i, v) in self.vectors.iter().enumerate() {
            if v.len() != dim {
                return Err(MetricsError::DimensionMismatch { expected: dim, got: v.len() });
            }
            if v.iter().any(|x| !x.is_finite()) {
                return Err(MetricsError::Embedding(format!("non-finite value in vector {i}")));
            }
            if v.iter().all(|&x| x == 0.0) {
                return Err(MetricsError::ZeroNorm(i));
            }
        }
        if let Some(w) = &self.idf {
            if w.len() != self.tokens.len() || w.iter().any(|x| !x.is_finite() || *x < 0.0) {
                return Err(MetricsError::Embedding("idf weights must be one finite non-negative value per token".into()));
            }
        }
        Ok(())
    }

    /// Attaches weights looked up from `idf`; unknown tokens get `default`.
    pub fn with_idf(mut self, idf: &HashMap<String, f64>, default: f64) -> Self {
        self.idf = Some(self.tokens.iter().map(|t| idf.get(t).copied().unwrap_or(default)).collect());
        self
    }

    fn unit_rows(&self) -> Vec<Vec<f64>> {
        self.vectors
            .iter()
            .map(|v| {
                let n = v.iter().map(|x| x * x).sum::<f64>().sqrt();
                v.iter().map(|x| x / n).collect()
            })
            .collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BertScoreResult {
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    pub idf_used: bool,
}

fn weighted_mean(values: &[f64], weights: Option<&Vec<f64>>) -> f64 {
    match weights {
        None => values.iter().sum::<f64>() / values.len() as f64,
        Some(w) => {
            let total: f64 = w.iter().sum();
            if total == 0.0 {
                0.0
            } else {
                values.iter().zip(w).map(|(v, w)| v * w).sum::<f64>() / total
            }
        }
    }
}

/// Greedy matching: each candidate token takes its most similar reference
/// token for precision, each reference token its most similar candidate
/// token for recall. Similarity is cosine. Idf weights are used only when
/// both sides carry them.
pub fn bertscore(candidate: &TokenEmbeddings, reference: &TokenEmbeddings) -> Result<BertScoreResult, MetricsError> {
    candidate.validate()?;
    reference.validate()?;
    if candidate.dim() != reference.dim() {
        return Err(MetricsError::DimensionMismatch {
            expected: candidate.dim(),
            got: reference.dim(),
        });
    }
    let c = candidate.unit_rows();
    let r = reference.unit_rows();
    let mut row_max = vec![f64::NEG_INFINITY; c.len()];
    let mut col_max = vec![f64::NEG_INFINITY; r.len()];
    for (i, ci) in c.iter().enumerate() {
        for (j, rj) in r.iter().enumerate() {
            let s: f64 = ci.iter().zip(rj).map(|(a, b)| a * b).sum();
            row_max[i] = row_max[i].max(s);
            col_max[j] = col_max[j].max(s);
        }
    }
    let idf_used = candidate.idf.is_some() && reference.idf.is_some();
    let (wc, wr) = if idf_used {
        (candidate.idf.as_ref(), reference.idf.as_ref())
    } else {
        (None, None)
    };
    let precision = weighted_mean(&row_max, wc);
    let recall = weighted_mean(&col_max, wr);
    let f1 = if precision + recall == 0.0 {
        0.0
    } else {
        2.0 * precision * recall / (precision + recall)
    };
    Ok(BertScoreResult {
        precision,
        recall,
        f1,
        idf_used,
    })
}

/// Smoothed idf over a reference corpus: `ln((M + 1) / (df + 1))` where `M`
/// is the number of documents and `df` the number containing the token.
/// Tokens never seen get `ln(M + 1)`, returned as the second value.
pub fn compute_idf<S: AsRef<str>>(documents: &[Vec<S>]) -> (HashMap<String, f64>, f64) {
    let m = documents.len() as f64;
    let mut df: HashMap<String, usize> = HashMap::new();
    for doc in documents {
        let uniq: BTreeSet<&str> = doc.iter().map(AsRef::as_ref).collect();
        for t in uniq {
            *df.entry(t.to_string()).or_default() += 1;
        }
    }
    let idf = df
        .into_iter()
        .map(|(t, d)| (t, ((m + 1.0) / (d as f64 + 1.0)).ln()))
        .collect();
    (idf, (m + 1.0).ln())
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn emb(vectors: Vec<Vec<f64>>) -> TokenEmbeddings {
        let tokens = (0..vectors.len()).map(|i| format!("t{i}")).collect();
        TokenEmbeddings::new(tokens, vectors).unwrap()
    }

    #[test]
    fn identical_inputs_score_one() {
        let a = emb(vec![vec![0.3, -1.2, 2.0], vec![1.0, 1.0, 0.0], vec![-0.5, 0.1, 0.9]]);
        let s = bertscore(&a, &a).unwrap();
        for v in [s.precision, s.recall, s.f1] {
            assert!((v - 1.0).abs() < 1e-9);
        }
        assert!(!s.idf_used);
    }

    #[test]
    fn hand_two_by_two() {
        // S = [[1, 0], [0, 0.5]]
        let h = (0.75f64).sqrt();
        let c = emb(vec![vec![1.0, 0.0, 0.0], vec![0.0, 0.5, h]]);
        let r = emb(vec![vec![1.0, 0.0, 0.0], vec![0.0, 1.0, 0.0]]);
        let s = bertscore(&c, &r).unwrap();
        assert!((s.precision - 0.75).abs() < 1e-9);
        assert!((s.recall - 0.75).abs() < 1e-9);
        assert!((s.f1 - 0.75).abs() < 1e-9);
    }

    #[test]
    fn orthogonal_inputs_score_zero() {
        let c = emb(vec![vec![1.0, 0.0, 0.0, 0.0], vec![0.0, 1.0, 0.0, 0.0]]);
        let r = emb(vec![vec![0.0, 0.0, 1.0, 0.0], vec![0.0, 0.0, 0.0, 2.0]]);
        let s = bertscore(&c, &r).unwrap();
        assert_eq!((s.precision, s.recall, s.f1), (0.0, 0.0, 0.0));
    }

    #[test]
    fn invalid_inputs() {
        assert!(matches!(
            TokenEmbeddings::new(vec!["a".into()], vec![vec![0.0, 0.0]]),
            Err(MetricsError::ZeroNorm(0))
        ));
        assert!(TokenEmbeddings::new(vec![], vec![]).is_err());
        assert!(TokenEmbeddings::new(vec!["a".into()], vec![vec![f64::NAN]]).is_err());
        assert!(TokenEmbeddings::new(vec!["a".into(), "b".into()], vec![vec![1.0]]).is_err());
        let a = emb(vec![vec![1.0, 0.0]]);
        let b = emb(vec![vec![1.0, 0.0, 0.0]]);
        assert!(matches!(bertscore(&a, &b), Err(MetricsError::DimensionMismatch { .. })));
    }

    #[test]
    fn idf_weights_shift_precision() {
        let c = TokenEmbeddings {
            tokens: vec!["rare".into(), "the".into()],
            vectors: vec![vec![1.0, 0.0], vec![0.0, 1.0]],
            idf: None,
        };
        let r = TokenEmbeddings {
            tokens: vec!["rare".into()],
            vectors: vec![vec![1.0, 0.0]],
            idf: None,
        };
        let plain = bertscore(&c, &r).unwrap();
        assert!((plain.precision - 0.5).abs() < 1e-12);
        let (idf, unseen) = compute_idf(&[vec!["the", "rare"], vec!["the"], vec!["the", "x"]]);
        assert!((idf["the"] - (4.0f64 / 4.0).ln()).abs() < 1e-12);
        assert!((idf["rare"] - (4.0f64 / 2.0).ln()).abs() < 1e-12);
        assert!((unseen - 4.0f64.ln()).abs() < 1e-12);
        let weighted = bertscore(&c.with_idf(&idf, unseen), &r.with_idf(&idf, unseen)).unwrap();
        assert!(weighted.idf_used);
        // "the" has idf 0, so only the perfectly matched token counts
        assert!((weighted.precision - 1.0).abs() < 1e-12);
    }

    fn vectors(n: usize, dim: usize) -> impl Strategy<Value = Vec<Vec<f64>>> {
        prop::collection::vec(
            prop::collection::vec(-1.0f64..1.0, dim).prop_filter("non-zero", |v| v.iter().any(|x| x.abs() > 1e-3)),
            1..=n,
        )
    }

    proptest! {
        #[test]
        fn precision_recall_symmetry(a in vectors(6, 4), b in vectors(6, 4)) {
            let (a, b) = (emb(a), emb(b));
            let ab = bertscore(&a, &b).unwrap();
            let ba = bertscore(&b, &a).unwrap();
            prop_assert!((ab.precision - ba.recall).abs() < 1e-12);
            prop_assert!((ab.recall - ba.precision).abs() < 1e-12);
        }

        #[test]
        fn permutation_and_scale_invariance(a in vectors(6, 3), b in vectors(6, 3), k in 0.01f64..100.0, rot in 0usize..6) {
            let base = bertscore(&emb(a.clone()), &emb(b.clone())).unwrap();
            let mut perm = a.clone();
            let r = rot % perm.len();
            perm.rotate_left(r);
            let scaled: Vec<Vec<f64>> = perm.iter().map(|v| v.iter().map(|x| x * k).collect()).collect();
            let s = bertscore(&emb(scaled), &emb(b)).unwrap();
            prop_assert!((s.precision - base.precision).abs() < 1e-9);
            prop_assert!((s.recall - base.recall).abs() < 1e-9);
            prop_assert!((s.f1 - base.f1).abs() < 1e-9);
        }

        #[test]
        fn nonnegative_similarities_stay_in_unit_range(a in prop::collection::vec(prop::collection::vec(0.01f64..1.0, 3), 1..5),
                                                     b in prop::collection::vec(prop::collection::vec(0.01f64..1.0, 3), 1..5)) {
            let s = bertscore(&emb(a), &emb(b)).unwrap();
            for v in [s.precision, s.recall, s.f1] {
                prop_assert!((0.0..=1.0 + 1e-12).contains(&v));
            }
        }

        #[test]
        fn weak_reference_token_cannot_raise_recall(a in vectors(5, 3), b in vectors(5, 3), extra in prop::collection::vec(-1.0f64..1.0, 3)) {
            prop_assume!(extra.iter().any(|x| x.abs() > 1e-3));
            let (ca, rb) = (emb(a), emb(b.clone()));
            let base = bertscore(&ca, &rb).unwrap();
            let probe = emb(vec![extra.clone()]);
            // best match of the new reference token among candidate tokens
            let best_new = bertscore(&probe, &ca).unwrap().precision;
            let mut b2 = b;
            b2.push(extra);
            let extended = bertscore(&ca, &emb(b2)).unwrap();
            if best_new <= base.recall {
                prop_assert!(extended.recall <= base.recall + 1e-12);
            }
        }
    }
}
