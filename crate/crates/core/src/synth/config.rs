//! Generator configuration.

use std::path::Path;

use chrono::NaiveDate;
use serde::{Deserialize, Serialize};

use super::SynthError;
use crate::features::default_reference_date;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum NoiseMode {
    /// Label is `latent > 0`.
    DeterministicThreshold,
    /// Label is drawn from Bernoulli(sigmoid(latent)).
    LogisticSampling,
}

/// Probability that each optional field is blanked after labels are fixed.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct MissingRates {
    pub founded_on: f64,
    pub created_at: f64,
    pub raised_amount: f64,
    pub description: f64,
    /// Dates on IPO and acquisition rows.
    pub event_date: f64,
}

impl Default for MissingRates {
    fn default() -> Self {
        MissingRates {
            founded_on: 0.0,
            created_at: 0.2,
            raised_amount: 0.0,
            description: 0.1,
            event_date: 0.1,
        }
    }
}

impl MissingRates {
    pub fn none() -> Self {
        MissingRates {
            founded_on: 0.0,
            created_at: 0.0,
            raised_amount: 0.0,
            description: 0.0,
            event_date: 0.0,
        }
    }

    fn all(&self) -> [(&'static str, f64); 5] {
        [
            ("founded_on", self.founded_on),
            ("created_at", self.created_at),
            ("raised_amount", self.raised_amount),
            ("description", self.description),
            ("event_date", self.event_date),
        ]
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct FeatureParams {
    pub age_min_years: f64,
    pub age_max_years: f64,
    /// Poisson mean of funding rounds per company.
    pub rounds_lambda: f64,
    /// Log-normal parameters of a single round's amount in USD.
    pub round_log_mu: f64,
    pub round_log_sigma: f64,
    /// Poisson mean of new investors per round.
    pub investors_per_round_lambda: f64,
    /// Poisson mean of companies bought per company.
    pub acquisitions_lambda: f64,
    pub executives_lambda: f64,
    /// Poisson mean of non-executive job rows.
    pub other_jobs_lambda: f64,
    pub investor_pool: usize,
}

impl Default for FeatureParams {
    fn default() -> Self {
        FeatureParams {
            age_min_years: 0.5,
            age_max_years: 20.0,
            rounds_lambda: 2.5,
            round_log_mu: 15.0,
            round_log_sigma: 1.0,
            investors_per_round_lambda: 2.0,
            acquisitions_lambda: 0.25,
            executives_lambda: 2.0,
            other_jobs_lambda: 3.0,
            investor_pool: 5000,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SynthConfig {
    pub n_companies: usize,
    pub seed: u64,
    /// Weights over the standardized features, in feature-vector order.
    pub beta: [f64; 6],
    pub intercept: f64,
    /// When set, the intercept is solved for so the expected positive rate
    /// matches, and `intercept` is ignored.
    pub target_positive_rate: Option<f64>,
    pub mode: NoiseMode,
    pub missing: MissingRates,
    pub params: FeatureParams,
    pub reference_date: NaiveDate,
    /// Share of descriptions carrying a label-independent phrase that
    /// mentions a liquidity event.
    pub leaky_phrase_rate: f64,
}

impl Default for SynthConfig {
    fn default() -> Self {
        Self::reference()
    }
}

impl SynthConfig {
    /// The shipped reference configuration.
    pub fn reference() -> Self {
        SynthConfig {
            n_companies: 2000,
            seed: 7,
            beta: [0.3, 1.2, 0.4, 0.9, 0.3, 0.8],
            intercept: 0.0,
            target_positive_rate: Some(0.5),
            mode: NoiseMode::LogisticSampling,
            missing: MissingRates::default(),
            params: FeatureParams::default(),
            reference_date: default_reference_date(),
            leaky_phrase_rate: 0.05,
        }
    }

    /// Reference mechanism with noise-free labels.
    pub fn deterministic() -> Self {
        SynthConfig {
            mode: NoiseMode::DeterministicThreshold,
            ..Self::reference()
        }
    }

    pub fn from_json_file(path: &Path) -> Result<Self, SynthError> {
        let text = std::fs::read_to_string(path).map_err(|e| SynthError::Io(format!("{}: {e}", path.display())))?;
        let cfg: SynthConfig =
            serde_json::from_str(&text).map_err(|e| SynthError::Config(format!("{}: {e}", path.display())))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<(), SynthError> {
        let bad = |m: String| Err(SynthError::Config(m));
        for (name, r) in self.missing.all() {
            if !(0.0..1.0).contains(&r) {
                return bad(format!("missing rate {name} must lie in [0, 1), got {r}"));
            }
        }
        if !(0.0..1.0).contains(&self.leaky_phrase_rate) {
            return bad("leaky_phrase_rate must lie in [0, 1)".into());
        }
        if let Some(t) = self.target_positive_rate {
            if !(t > 0.0 && t < 1.0) {
                return bad(format!("target_positive_rate must lie in (0, 1), got {t}"));
            }
        }
        if self.beta.iter().chain([&self.intercept]).any(|b| !b.is_finite()) {
            return bad("coefficients must be finite".into());
        }
        let p = &self.params;
        if !(p.age_min_years >= 0.0 && p.age_max_years >= p.age_min_years && p.age_max_years.is_finite()) {
            return bad("age range must satisfy 0 <= min <= max".into());
        }
        let lambdas = [
            p.rounds_lambda,
            p.investors_per_round_lambda,
            p.acquisitions_lambda,
            p.executives_lambda,
            p.other_jobs_lambda,
        ];
        if lambdas.iter().any(|l| !(l.is_finite() && *l >= 0.0)) {
            return bad("Poisson means must be finite and non-negative".into());
        }
        if !(p.round_log_mu.is_finite() && p.round_log_sigma.is_finite() && p.round_log_sigma >= 0.0) {
            return bad("log-normal parameters must be finite with sigma >= 0".into());
        }
        if p.investor_pool == 0 {
            return bad("investor_pool must be positive".into());
        }
        Ok(())
    }
}
