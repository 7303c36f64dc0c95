//! Second-order gradient-boosted decision trees for binary classification.
//!
//! Logistic loss, exact greedy splits over sorted unique feature values,
//! L2-regularised leaf weights and a split-gain penalty. Every round fits
//! one tree to the gradients `p - y` and hessians `p (1 - p)` of the current
//! scores. Splitting is deterministic: among equal-gain candidates the
//! lowest feature index wins, then the lowest threshold.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub const MODEL_FORMAT_VERSION: u32 = 1;

#[derive(Debug, Error, PartialEq)]
pub enum GbdtError {
    #[error("training set needs at least 2 rows, got {0}")]
    TooFewRows(usize),
    #[error("labels contain a single class")]
    SingleClass,
    #[error("label at row {0} is not 0 or 1")]
    BadLabel(usize),
    #[error("row {row}: expected {expected} features, got {got}")]
    Width { row: usize, expected: usize, got: usize },
    #[error("non-finite feature value at row {row}, column {col}")]
    NonFinite { row: usize, col: usize },
    #[error("invalid config: {0}")]
    Config(String),
    #[error("model file: {0}")]
    Io(String),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GbdtConfig {
    pub n_rounds: usize,
    pub max_depth: usize,
    pub learning_rate: f64,
    /// L2 penalty on leaf weights.
    pub lambda: f64,
    /// Minimum gain for a split to be kept.
    pub gamma: f64,
    /// Minimum hessian sum in each child.
    pub min_child_weight: f64,
    pub seed: u64,
}

impl Default for GbdtConfig {
    fn default() -> Self {
        GbdtConfig {
            n_rounds: 100,
            max_depth: 4,
            learning_rate: 0.1,
            lambda: 1.0,
            gamma: 0.0,
            min_child_weight: 1.0,
            seed: 0,
        }
    }
}

impl GbdtConfig {
    pub fn validate(&self) -> Result<(), GbdtError> {
        let bad = |m: &str| Err(GbdtError::Config(m.to_string()));
        if self.n_rounds < 1 {
            return bad("n_rounds must be at least 1");
        }
        if self.max_depth < 1 {
            return bad("max_depth must be at least 1");
        }
        if !(self.learning_rate > 0.0 && self.learning_rate <= 1.0) {
            return bad("learning_rate must lie in (0, 1]");
        }
        if !(self.lambda >= 0.0 && self.gamma >= 0.0 && self.min_child_weight >= 0.0) {
            return bad("lambda, gamma and min_child_weight must be non-negative");
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum Node {
    Split {
        feature: usize,
        /// Rows with `x[feature] <= threshold` go left.
        threshold: f64,
        left: usize,
        right: usize,
    },
    Leaf {
        /// Already scaled by the learning rate.
        weight: f64,
    },
}

/// Flat node arena; node 0 is the root.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Tree {
    pub nodes: Vec<Node>,
}

impl Tree {
    pub fn predict(&self, x: &[f64]) -> f64 {
        let mut i = 0;
        loop {
            match &self.nodes[i] {
                Node::Leaf { weight } => return *weight,
                Node::Split {
                    feature,
                    threshold,
                    left,
                    right,
                } => i = if x[*feature] <= *threshold { *left } else { *right },
            }
        }
    }

    pub fn depth(&self) -> usize {
        fn go(t: &Tree, i: usize) -> usize {
            match &t.nodes[i] {
                Node::Leaf { .. } => 0,
                Node::Split { left, right, .. } => 1 + go(t, *left).max(go(t, *right)),
            }
        }
        go(self, 0)
    }

    /// `(feature, depth)` of every split in pre-order.
    pub fn split_features(&self) -> Vec<(usize, usize)> {
        fn go(t: &Tree, i: usize, d: usize, out: &mut Vec<(usize, usize)>) {
            if let Node::Split { feature, left, right, .. } = &t.nodes[i] {
                out.push((*feature, d));
                go(t, *left, d + 1, out);
                go(t, *right, d + 1, out);
            }
        }
        let mut out = Vec::new();
        go(self, 0, 0, &mut out);
        out
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GbdtModel {
    pub format_version: u32,
    pub n_features: usize,
    /// Log-odds of the training prior.
    pub base_score: f64,
    pub trees: Vec<Tree>,
    pub config: GbdtConfig,
}

pub fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

/// Mean logistic loss of `scores` (log-odds) against `y`.
pub fn log_loss(scores: &[f64], y: &[u8]) -> f64 {
    // log(1 + e^s) - y s, computed stably
    let total: f64 = scores
        .iter()
        .zip(y)
        .map(|(&s, &t)| {
            let softplus = if s > 0.0 { s + (-s).exp().ln_1p() } else { s.exp().ln_1p() };
            softplus - f64::from(t) * s
        })
        .sum();
    total / scores.len() as f64
}

fn check_row(row: usize, x: &[f64], width: usize) -> Result<(), GbdtError> {
    if x.len() != width {
        return Err(GbdtError::Width {
            row,
            expected: width,
            got: x.len(),
        });
    }
    if let Some(col) = x.iter().position(|v| !v.is_finite()) {
        return Err(GbdtError::NonFinite { row, col });
    }
    Ok(())
}

struct Builder<'a> {
    x: &'a [Vec<f64>],
    grad: &'a [f64],
    hess: &'a [f64],
    cfg: &'a GbdtConfig,
    nodes: Vec<Node>,
}

struct BestSplit {
    gain: f64,
    feature: usize,
    threshold: f64,
    left: Vec<usize>,
    right: Vec<usize>,
}

impl Builder<'_> {
    fn leaf_weight(&self, g: f64, h: f64) -> f64 {
        -g / (h + self.cfg.lambda) * self.cfg.learning_rate
    }

    fn score(&self, g: f64, h: f64) -> f64 {
        g * g / (h + self.cfg.lambda)
    }

    fn best_split(&self, rows: &[usize], g_tot: f64, h_tot: f64) -> Option<BestSplit> {
        let n_features = self.x[rows[0]].len();
        let parent = self.score(g_tot, h_tot);
        let mut best: Option<(f64, usize, f64)> = None;
        let mut sorted = rows.to_vec();
        for f in 0..n_features {
            sorted.sort_by(|&a, &b| self.x[a][f].total_cmp(&self.x[b][f]).then(a.cmp(&b)));
            let (mut gl, mut hl) = (0.0, 0.0);
            for k in 0..sorted.len() - 1 {
                let i = sorted[k];
                gl += self.grad[i];
                hl += self.hess[i];
                let (v, next) = (self.x[i][f], self.x[sorted[k + 1]][f]);
                if v == next {
                    continue;
                }
                let (gr, hr) = (g_tot - gl, h_tot - hl);
                if hl < self.cfg.min_child_weight || hr < self.cfg.min_child_weight {
                    continue;
                }
                let gain = 0.5 * (self.score(gl, hl) + self.score(gr, hr) - parent) - self.cfg.gamma;
                // strict `>` keeps the earliest feature and lowest threshold on ties
                if gain > 0.0 && best.map_or(true, |(bg, _, _)| gain > bg) {
                    best = Some((gain, f, v + (next - v) / 2.0));
                }
            }
        }
        let (gain, feature, threshold) = best?;
        let (left, right): (Vec<usize>, Vec<usize>) =
            rows.iter().partition(|&&i| self.x[i][feature] <= threshold);
        Some(BestSplit {
            gain,
            feature,
            threshold,
            left,
            right,
        })
    }

    fn build(&mut self, rows: &[usize], depth: usize) -> usize {
        let g: f64 = rows.iter().map(|&i| self.grad[i]).sum();
        let h: f64 = rows.iter().map(|&i| self.hess[i]).sum();
        let id = self.nodes.len();
        self.nodes.push(Node::Leaf {
            weight: self.leaf_weight(g, h),
        });
        if depth >= self.cfg.max_depth || rows.len() < 2 {
            return id;
        }
        if let Some(split) = self.best_split(rows, g, h) {
            debug_assert!(split.gain > 0.0);
            let left = self.build(&split.left, depth + 1);
            let right = self.build(&split.right, depth + 1);
            self.nodes[id] = Node::Split {
                feature: split.feature,
                threshold: split.threshold,
                left,
                right,
            };
        }
        id
    }
}

/// Training trace: mean log-loss before the first round and after each one.
#[derive(Debug, Clone, PartialEq)]
pub struct FitTrace {
    pub losses: Vec<f64>,
}

pub fn fit(x: &[Vec<f64>], y: &[u8], config: &GbdtConfig) -> Result<GbdtModel, GbdtError> {
    fit_traced(x, y, config).map(|(m, _)| m)
}

pub fn fit_traced(
    x: &[Vec<f64>],
    y: &[u8],
    config: &GbdtConfig,
) -> Result<(GbdtModel, FitTrace), GbdtError> {
    config.validate()?;
    let n = x.len();
    if n < 2 {
        return Err(GbdtError::TooFewRows(n));
    }
    if y.len() != n {
        return Err(GbdtError::Config(format!("{n} rows but {} labels", y.len())));
    }
    if let Some(i) = y.iter().position(|&t| t > 1) {
        return Err(GbdtError::BadLabel(i));
    }
    let width = x[0].len();
    for (i, row) in x.iter().enumerate() {
        check_row(i, row, width)?;
    }
    let pos = y.iter().filter(|&&t| t == 1).count();
    if pos == 0 || pos == n {
        return Err(GbdtError::SingleClass);
    }
    let prior = pos as f64 / n as f64;
    let base_score = (prior / (1.0 - prior)).ln();

    let mut scores = vec![base_score; n];
    let mut trees = Vec::with_capacity(config.n_rounds);
    let mut losses = vec![log_loss(&scores, y)];
    let rows: Vec<usize> = (0..n).collect();
    let mut grad = vec![0.0; n];
    let mut hess = vec![0.0; n];
    for _ in 0..config.n_rounds {
        for i in 0..n {
            let p = sigmoid(scores[i]);
            grad[i] = p - f64::from(y[i]);
            hess[i] = p * (1.0 - p);
        }
        let mut b = Builder {
            x,
            grad: &grad,
            hess: &hess,
            cfg: config,
            nodes: Vec::new(),
        };
        b.build(&rows, 0);
        let tree = Tree { nodes: b.nodes };
        for (s, row) in scores.iter_mut().zip(x) {
            *s += tree.predict(row);
        }
        losses.push(log_loss(&scores, y));
        trees.push(tree);
    }
    let model = GbdtModel {
        format_version: MODEL_FORMAT_VERSION,
        n_features: width,
        base_score,
        trees,
        config: config.clone(),
    };
    Ok((model, FitTrace { losses }))
}

impl GbdtModel {
    /// A model with no trees; predicts the prior everywhere.
    pub fn constant(base_score: f64, n_features: usize, config: GbdtConfig) -> Self {
        GbdtModel {
            format_version: MODEL_FORMAT_VERSION,
            n_features,
            base_score,
            trees: Vec::new(),
            config,
        }
    }

    pub fn raw_score(&self, x: &[f64]) -> Result<f64, GbdtError> {
        check_row(0, x, self.n_features)?;
        Ok(self.base_score + self.trees.iter().map(|t| t.predict(x)).sum::<f64>())
    }

    pub fn predict_proba(&self, x: &[f64]) -> Result<f64, GbdtError> {
        // clamp keeps the probability strictly inside (0, 1) for huge scores
        let p = sigmoid(self.raw_score(x)?);
        Ok(p.clamp(f64::MIN_POSITIVE, 1.0 - f64::EPSILON / 2.0))
    }

    pub fn predict(&self, x: &[f64], threshold: f64) -> Result<u8, GbdtError> {
        Ok(u8::from(self.predict_proba(x)? >= threshold))
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("model serializes")
    }

    pub fn from_json(text: &str) -> Result<Self, GbdtError> {
        let m: GbdtModel = serde_json::from_str(text).map_err(|e| GbdtError::Io(e.to_string()))?;
        if m.format_version != MODEL_FORMAT_VERSION {
            return Err(GbdtError::Io(format!(
                "unsupported model format version {}",
                m.format_version
            )));
        }
        for t in &m.trees {
            for node in &t.nodes {
                if let Node::Split { feature, left, right, .. } = node {
                    if *feature >= m.n_features || *left >= t.nodes.len() || *right >= t.nodes.len() {
                        return Err(GbdtError::Io("model tree references a missing node".into()));
                    }
                }
            }
        }
        Ok(m)
    }

    pub fn save(&self, path: &Path) -> Result<(), GbdtError> {
        fs::write(path, self.to_json() + "\n").map_err(|e| GbdtError::Io(format!("{}: {e}", path.display())))
    }

    pub fn load(path: &Path) -> Result<Self, GbdtError> {
        let text = fs::read_to_string(path).map_err(|e| GbdtError::Io(format!("{}: {e}", path.display())))?;
        Self::from_json(&text)
    }
}
