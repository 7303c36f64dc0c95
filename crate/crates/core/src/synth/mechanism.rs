//! Feature sampling and the latent success score.
//!
//! Each feature is standardized against the analytic mean and standard
//! deviation implied by the configured distributions, so `beta` is
//! unit-free. Funding totals and investor counts are compound Poisson sums;
//! their moments follow from the per-round distributions.

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, LogNormal, Poisson};
use serde::{Deserialize, Serialize};

use super::config::{FeatureParams, NoiseMode, SynthConfig};
use super::SynthError;
use crate::features::DAYS_PER_YEAR;
use crate::gbdt::sigmoid;

/// Features of one company before any field is blanked.
#[derive(Debug, Clone, PartialEq)]
pub struct RawCompany {
    pub age_days: i64,
    /// Whole-dollar amounts, one per round.
    pub round_amounts: Vec<f64>,
    pub investors_per_round: Vec<u32>,
    pub acquisitions_quota: u32,
    pub executives: u32,
    pub other_jobs: u32,
}

impl RawCompany {
    pub fn num_investors(&self) -> u32 {
        self.investors_per_round.iter().sum()
    }

    /// Feature vector as the pipeline derives it from the emitted tables.
    pub fn features(&self) -> [f64; 6] {
        [
            self.age_days as f64 / DAYS_PER_YEAR,
            self.round_amounts.iter().sum(),
            self.round_amounts.len() as f64,
            f64::from(self.num_investors()),
            f64::from(self.acquisitions_quota),
            f64::from(self.executives),
        ]
    }
}

pub(crate) fn poisson<R: Rng>(lambda: f64, rng: &mut R) -> u32 {
    if lambda <= 0.0 {
        return 0;
    }
    let d = Poisson::new(lambda).expect("validated lambda");
    d.sample(rng) as u32
}

fn age_day_range(p: &FeatureParams) -> (i64, i64) {
    let lo = (p.age_min_years * DAYS_PER_YEAR).ceil() as i64;
    let hi = ((p.age_max_years * DAYS_PER_YEAR).floor() as i64).max(lo);
    (lo, hi)
}

pub fn sample_company<R: Rng>(p: &FeatureParams, rng: &mut R) -> RawCompany {
    let (lo, hi) = age_day_range(p);
    let age_days = rng.gen_range(lo..=hi);
    let rounds = poisson(p.rounds_lambda, rng);
    let amount = LogNormal::new(p.round_log_mu, p.round_log_sigma).expect("validated log-normal");
    let round_amounts: Vec<f64> = (0..rounds).map(|_| amount.sample(rng).round().max(1.0)).collect();
    let mut budget = p.investor_pool as u32;
    let investors_per_round = (0..rounds)
        .map(|_| {
            let k = poisson(p.investors_per_round_lambda, rng).min(budget);
            budget -= k;
            k
        })
        .collect();
    RawCompany {
        age_days,
        round_amounts,
        investors_per_round,
        acquisitions_quota: poisson(p.acquisitions_lambda, rng),
        executives: poisson(p.executives_lambda, rng),
        other_jobs: poisson(p.other_jobs_lambda, rng),
    }
}

/// Analytic (mean, sd) per feature; a zero sd is replaced by 1.
pub fn feature_moments(p: &FeatureParams) -> [(f64, f64); 6] {
    let (lo, hi) = age_day_range(p);
    let (a, b) = (lo as f64 / DAYS_PER_YEAR, hi as f64 / DAYS_PER_YEAR);
    let s2 = p.round_log_sigma * p.round_log_sigma;
    let m1 = (p.round_log_mu + s2 / 2.0).exp();
    let m2 = (2.0 * p.round_log_mu + 2.0 * s2).exp();
    let lr = p.rounds_lambda;
    let li = p.investors_per_round_lambda;
    let sd = |v: f64| if v > 0.0 { v.sqrt() } else { 1.0 };
    [
        ((a + b) / 2.0, sd((b - a).powi(2) / 12.0)),
        (lr * m1, sd(lr * m2)),
        (lr, sd(lr)),
        (lr * li, sd(lr * (li + li * li))),
        (p.acquisitions_lambda, sd(p.acquisitions_lambda)),
        (p.executives_lambda, sd(p.executives_lambda)),
    ]
}

pub fn standardize(x: &[f64; 6], moments: &[(f64, f64); 6]) -> [f64; 6] {
    std::array::from_fn(|i| (x[i] - moments[i].0) / moments[i].1)
}

/// `beta . z` without the intercept.
pub fn linear_part(cfg: &SynthConfig, x: &[f64; 6], moments: &[(f64, f64); 6]) -> f64 {
    let z = standardize(x, moments);
    cfg.beta.iter().zip(z).map(|(b, z)| b * z).sum()
}

pub(crate) fn stream(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = <ChaCha8Rng as rand::SeedableRng>::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

pub(crate) const STREAM_CALIBRATION: u64 = 1;
pub(crate) const STREAM_FEATURES: u64 = 2;
pub(crate) const STREAM_LABELS: u64 = 3;
pub(crate) const STREAM_EVENTS: u64 = 4;
pub(crate) const STREAM_MISSING: u64 = 5;
pub(crate) const STREAM_TEXT: u64 = 6;
pub(crate) const STREAM_BAYES: u64 = 7;

const CALIBRATION_SAMPLES: usize = 20_000;

/// Intercept in effect: the configured one, or the value that makes the
/// expected positive rate over a seeded calibration sample hit the target.
pub fn resolved_intercept(cfg: &SynthConfig) -> f64 {
    let Some(target) = cfg.target_positive_rate else {
        return cfg.intercept;
    };
    let moments = feature_moments(&cfg.params);
    let mut rng = stream(cfg.seed, STREAM_CALIBRATION);
    let lin: Vec<f64> = (0..CALIBRATION_SAMPLES)
        .map(|_| linear_part(cfg, &sample_company(&cfg.params, &mut rng).features(), &moments))
        .collect();
    let rate = |b: f64| -> f64 {
        let total: f64 = match cfg.mode {
            NoiseMode::DeterministicThreshold => lin.iter().filter(|&&l| l + b > 0.0).count() as f64,
            NoiseMode::LogisticSampling => lin.iter().map(|&l| sigmoid(l + b)).sum(),
        };
        total / lin.len() as f64
    };
    let (mut lo, mut hi) = (-50.0, 50.0);
    for _ in 0..100 {
        let mid = (lo + hi) / 2.0;
        if rate(mid) < target {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    (lo + hi) / 2.0
}

pub fn realize_label(mode: NoiseMode, latent: f64, u: f64) -> u8 {
    match mode {
        NoiseMode::DeterministicThreshold => u8::from(latent > 0.0),
        NoiseMode::LogisticSampling => u8::from(u < sigmoid(latent)),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BayesEstimate {
    pub accuracy: f64,
    pub std_error: f64,
    pub samples: usize,
}

pub const MIN_MC_SAMPLES: usize = 1000;

/// Monte-Carlo estimate of the best achievable accuracy: the mean of
/// `max(p, 1 - p)` with `p = sigmoid(latent)` over sampled companies.
pub fn estimate_bayes_accuracy(cfg: &SynthConfig, n_mc: usize) -> Result<BayesEstimate, SynthError> {
    cfg.validate()?;
    if cfg.mode == NoiseMode::DeterministicThreshold {
        return Ok(BayesEstimate {
            accuracy: 1.0,
            std_error: 0.0,
            samples: n_mc,
        });
    }
    if n_mc < MIN_MC_SAMPLES {
        return Err(SynthError::Config(format!("need at least {MIN_MC_SAMPLES} samples, got {n_mc}")));
    }
    let b = resolved_intercept(cfg);
    let moments = feature_moments(&cfg.params);
    let mut rng = stream(cfg.seed, STREAM_BAYES);
    let vals: Vec<f64> = (0..n_mc)
        .map(|_| {
            let p = sigmoid(linear_part(cfg, &sample_company(&cfg.params, &mut rng).features(), &moments) + b);
            p.max(1.0 - p)
        })
        .collect();
    let n = vals.len() as f64;
    let mean = vals.iter().sum::<f64>() / n;
    let var = vals.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0);
    Ok(BayesEstimate {
        accuracy: mean,
        std_error: (var / n).sqrt(),
        samples: n_mc,
    })
}
