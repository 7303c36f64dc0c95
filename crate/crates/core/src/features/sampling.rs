//! Seeded class balancing and train/val/test splitting.

use rand::seq::index;
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::profile::CompanyProfile;
use super::FeatureError;

/// Anything carrying a binary class label.
pub trait Labeled {
    fn label(&self) -> u8;
}

impl Labeled for CompanyProfile {
    fn label(&self) -> u8 {
        self.success
    }
}

pub(crate) fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

fn class_indices<T: Labeled>(items: &[T]) -> [Vec<usize>; 2] {
    let mut out = [Vec::new(), Vec::new()];
    for (i, it) in items.iter().enumerate() {
        out[usize::from(it.label() != 0)].push(i);
    }
    out
}

/// Draws `k` of `pool` uniformly without replacement.
pub(crate) fn draw(pool: &[usize], k: usize, rng: &mut ChaCha8Rng) -> Vec<usize> {
    index::sample(rng, pool.len(), k)
        .into_iter()
        .map(|i| pool[i])
        .collect()
}

/// Undersamples the majority class to the minority count. Output keeps the
/// input order.
pub fn balance_dataset<T: Labeled + Clone>(items: &[T], seed: u64) -> Result<Vec<T>, FeatureError> {
    let [neg, pos] = class_indices(items);
    if neg.is_empty() || pos.is_empty() {
        return Err(FeatureError::EmptyClass {
            class: if pos.is_empty() { 1 } else { 0 },
        });
    }
    let mut rng = rng(seed);
    let (keep_all, shrink) = if pos.len() <= neg.len() { (pos, neg) } else { (neg, pos) };
    let mut chosen = draw(&shrink, keep_all.len(), &mut rng);
    chosen.extend(keep_all);
    chosen.sort_unstable();
    Ok(chosen.into_iter().map(|i| items[i].clone()).collect())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SplitSpec {
    pub train: f64,
    pub val: f64,
    pub test: f64,
    pub seed: u64,
    pub stratified: bool,
}

impl Default for SplitSpec {
    fn default() -> Self {
        SplitSpec {
            train: 0.8,
            val: 0.1,
            test: 0.1,
            seed: 0,
            stratified: true,
        }
    }
}

impl SplitSpec {
    pub fn validate(&self) -> Result<(), FeatureError> {
        let r = [self.train, self.val, self.test];
        if r.iter().any(|x| !x.is_finite() || *x <= 0.0) || ((r.iter().sum::<f64>()) - 1.0).abs() > 1e-9 {
            return Err(FeatureError::BadRatios(r));
        }
        Ok(())
    }
}

/// Largest-remainder apportionment of `n` items over `ratios`. Ties in the
/// remainder go to the earlier slot.
pub fn apportion(n: usize, ratios: [f64; 3]) -> [usize; 3] {
    let exact: Vec<f64> = ratios.iter().map(|r| r * n as f64).collect();
    let mut sizes = [0usize; 3];
    for (s, e) in sizes.iter_mut().zip(&exact) {
        *s = e.floor() as usize;
    }
    let mut left = n - sizes.iter().sum::<usize>();
    let mut order: Vec<usize> = (0..3).collect();
    order.sort_by(|&a, &b| {
        let ra = exact[a] - exact[a].floor();
        let rb = exact[b] - exact[b].floor();
        rb.total_cmp(&ra).then(a.cmp(&b))
    });
    for i in order {
        if left == 0 {
            break;
        }
        sizes[i] += 1;
        left -= 1;
    }
    sizes
}

#[derive(Debug, Clone, PartialEq)]
pub struct Splits<T> {
    pub train: Vec<T>,
    pub val: Vec<T>,
    pub test: Vec<T>,
}

/// Seeded partition into train/val/test. Each part keeps input order.
pub fn split<T: Labeled + Clone>(items: &[T], spec: &SplitSpec) -> Result<Splits<T>, FeatureError> {
    spec.validate()?;
    if items.len() < 3 {
        return Err(FeatureError::CorpusTooSmall(items.len()));
    }
    let ratios = [spec.train, spec.val, spec.test];
    let mut rng = rng(spec.seed);
    let groups: Vec<Vec<usize>> = if spec.stratified {
        class_indices(items).into_iter().collect()
    } else {
        vec![(0..items.len()).collect()]
    };
    let mut parts: [Vec<usize>; 3] = [Vec::new(), Vec::new(), Vec::new()];
    for mut group in groups {
        group.shuffle(&mut rng);
        let sizes = apportion(group.len(), ratios);
        let mut it = group.into_iter();
        for (part, size) in parts.iter_mut().zip(sizes) {
            part.extend(it.by_ref().take(size));
        }
    }
    let [train, val, test] = parts.map(|mut idx| {
        idx.sort_unstable();
        idx.into_iter().map(|i| items[i].clone()).collect::<Vec<T>>()
    });
    Ok(Splits { train, val, test })
}
