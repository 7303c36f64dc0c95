//! Emitting the six tables and the ground-truth file.

use std::io::Write;
use std::path::Path;

use chrono::{Duration, NaiveDate};
use rand::seq::{index, SliceRandom};
use rand::Rng;
use serde::{Deserialize, Serialize};

use super::config::SynthConfig;
use super::mechanism::{
    linear_part, feature_moments, realize_label, resolved_intercept, sample_company, stream, RawCompany,
    STREAM_EVENTS, STREAM_FEATURES, STREAM_LABELS, STREAM_MISSING, STREAM_TEXT,
};
use super::SynthError;
use crate::ingest::{
    write_dir_mapped, AcquisitionRow, ColumnMapping, FundingRoundRow, InvestmentRow, IpoRow, JobRow,
    OrganizationRow, Tables,
};

pub const GROUND_TRUTH_FILE: &str = "ground_truth.jsonl";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroundTruthRow {
    pub org_id: String,
    /// `beta . z + intercept`.
    pub latent: f64,
    pub label: u8,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SynthCorpus {
    pub tables: Tables,
    pub ground_truth: Vec<GroundTruthRow>,
    pub intercept: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SynthSummary {
    pub companies: usize,
    pub positives: usize,
    pub ipos: usize,
    pub acquisitions: usize,
    pub intercept: f64,
}

impl SynthCorpus {
    pub fn summary(&self) -> SynthSummary {
        SynthSummary {
            companies: self.ground_truth.len(),
            positives: self.ground_truth.iter().filter(|g| g.label == 1).count(),
            ipos: self.tables.ipos.len(),
            acquisitions: self.tables.acquisitions.len(),
            intercept: self.intercept,
        }
    }
}

const EXECUTIVE_TITLES: [&str; 8] = [
    "CEO",
    "Chief Technology Officer",
    "CFO",
    "Co-Founder",
    "Founder",
    "President",
    "VP of Sales",
    "COO",
];

const OTHER_TITLES: [&str; 8] = [
    "Software Engineer",
    "Account Manager",
    "Designer",
    "Data Scientist",
    "Marketing Lead",
    "Sales Representative",
    "Product Manager",
    "Recruiter",
];

const NAME_HEADS: [&str; 12] = [
    "Bright", "Blue", "Nimbus", "Quartz", "Summit", "Vector", "Harbor", "Lumen", "Cedar", "Orbit", "Pulse", "Atlas",
];
const NAME_TAILS: [&str; 8] = ["Labs", "Systems", "Works", "Health", "Robotics", "Analytics", "Networks", "Energy"];

const PRODUCTS: [&str; 10] = [
    "analytics software",
    "payment infrastructure",
    "logistics tools",
    "a telehealth platform",
    "developer tooling",
    "energy storage systems",
    "a hiring marketplace",
    "security software",
    "warehouse automation",
    "learning software",
];
const MARKETS: [&str; 10] = [
    "small businesses",
    "hospitals",
    "retailers",
    "banks",
    "manufacturers",
    "schools",
    "freight carriers",
    "game studios",
    "farmers",
    "insurers",
];
/// Label-independent sentences that the leakage guard must scrub.
const LEAKY_PHRASES: [&str; 3] = [
    "It is exploring an IPO.",
    "The team is open to acquisition offers.",
    "Several rivals were acquired last year.",
];

fn org_id(i: usize) -> String {
    format!("org-{i:06}")
}

fn days_before(reference: NaiveDate, days: i64) -> NaiveDate {
    reference - Duration::days(days)
}

struct Mechanism<'a> {
    cfg: &'a SynthConfig,
    moments: [(f64, f64); 6],
    intercept: f64,
}

impl Mechanism<'_> {
    fn latent(&self, raw: &RawCompany) -> f64 {
        linear_part(self.cfg, &raw.features(), &self.moments) + self.intercept
    }
}

/// Which positives become acquisitions and who buys them.
struct Events {
    /// `(acquiree, acquirer)` company indices.
    acquisitions: Vec<(usize, usize)>,
    ipos: Vec<usize>,
}

/// Realizes labels, trimming acquisition quotas until every bought company
/// is a positive and nobody buys itself. Quota changes feed back into the
/// latent score, so labels are recomputed after each adjustment.
fn settle(
    mech: &Mechanism<'_>,
    raws: &mut [RawCompany],
    uniforms: &[f64],
    latents: &mut [f64],
    labels: &mut [u8],
    rng: &mut impl Rng,
) -> Events {
    let recompute = |i: usize, raws: &[RawCompany], latents: &mut [f64], labels: &mut [u8]| {
        latents[i] = mech.latent(&raws[i]);
        labels[i] = realize_label(mech.cfg.mode, latents[i], uniforms[i]);
    };
    loop {
        let mut slots: Vec<usize> = raws
            .iter()
            .enumerate()
            .flat_map(|(i, r)| std::iter::repeat(i).take(r.acquisitions_quota as usize))
            .collect();
        let mut positives = labels.iter().filter(|&&l| l == 1).count();
        while slots.len() > positives {
            let owner = slots.swap_remove(rng.gen_range(0..slots.len()));
            let before = labels[owner];
            raws[owner].acquisitions_quota -= 1;
            recompute(owner, raws, latents, labels);
            positives = positives + usize::from(labels[owner]) - usize::from(before);
        }
        slots.sort_unstable();
        slots.shuffle(rng);
        let mut pos: Vec<usize> = (0..labels.len()).filter(|&i| labels[i] == 1).collect();
        pos.shuffle(rng);
        let a = slots.len();
        let acquirees = &pos[..a];
        let mut stuck = None;
        for i in 0..a {
            if slots[i] != acquirees[i] {
                continue;
            }
            let swap = (0..a).find(|&j| j != i && slots[j] != acquirees[i] && slots[i] != acquirees[j]);
            match swap {
                Some(j) => slots.swap(i, j),
                None => {
                    stuck = Some(slots[i]);
                    break;
                }
            }
        }
        if let Some(owner) = stuck {
            raws[owner].acquisitions_quota -= 1;
            recompute(owner, raws, latents, labels);
            continue;
        }
        let mut acquisitions: Vec<(usize, usize)> = acquirees.iter().copied().zip(slots).collect();
        acquisitions.sort_unstable();
        let mut ipos = pos[a..].to_vec();
        ipos.sort_unstable();
        return Events { acquisitions, ipos };
    }
}

fn description<R: Rng>(name: &str, leaky_rate: f64, rng: &mut R) -> String {
    let product = PRODUCTS[rng.gen_range(0..PRODUCTS.len())];
    let market = MARKETS[rng.gen_range(0..MARKETS.len())];
    let leak = rng.gen::<f64>() < leaky_rate;
    let phrase = LEAKY_PHRASES[rng.gen_range(0..LEAKY_PHRASES.len())];
    let mut d = format!("{name} builds {product} for {market}.");
    if leak {
        d.push(' ');
        d.push_str(phrase);
    }
    d
}

/// Builds the corpus in memory. Fully determined by the config.
pub fn synthesize(cfg: &SynthConfig) -> Result<SynthCorpus, SynthError> {
    cfg.validate()?;
    let n = cfg.n_companies;
    let mech = Mechanism {
        cfg,
        moments: feature_moments(&cfg.params),
        intercept: resolved_intercept(cfg),
    };
    let mut rf = stream(cfg.seed, STREAM_FEATURES);
    let mut raws: Vec<RawCompany> = (0..n).map(|_| sample_company(&cfg.params, &mut rf)).collect();
    let mut rl = stream(cfg.seed, STREAM_LABELS);
    let uniforms: Vec<f64> = (0..n).map(|_| rl.gen::<f64>()).collect();
    let mut latents: Vec<f64> = raws.iter().map(|r| mech.latent(r)).collect();
    let mut labels: Vec<u8> = latents
        .iter()
        .zip(&uniforms)
        .map(|(&l, &u)| realize_label(cfg.mode, l, u))
        .collect();
    let mut re = stream(cfg.seed, STREAM_EVENTS);
    let events = settle(&mech, &mut raws, &uniforms, &mut latents, &mut labels, &mut re);

    let mut rt = stream(cfg.seed, STREAM_TEXT);
    let mut rm = stream(cfg.seed, STREAM_MISSING);
    let miss = &cfg.missing;
    let mut blank = |rate: f64| rm.gen::<f64>() < rate;
    let reference = cfg.reference_date;
    let mut t = Tables::default();
    let mut founded = Vec::with_capacity(n);
    for (i, raw) in raws.iter().enumerate() {
        let id = org_id(i);
        let name = format!(
            "{}{} {} {i}",
            NAME_HEADS[rt.gen_range(0..NAME_HEADS.len())],
            NAME_TAILS[rt.gen_range(0..NAME_TAILS.len())].to_lowercase(),
            NAME_TAILS[rt.gen_range(0..NAME_TAILS.len())],
        );
        let desc = description(&name, cfg.leaky_phrase_rate, &mut rt);
        let founded_on = days_before(reference, raw.age_days);
        founded.push(founded_on);
        let lag = re.gen_range(0..=365.min(raw.age_days));
        let created_at = founded_on + Duration::days(lag);
        t.organizations.push(OrganizationRow {
            org_id: id.clone(),
            name,
            description: if blank(miss.description) { String::new() } else { desc },
            founded_on: (!blank(miss.founded_on)).then_some(founded_on),
            created_at: (!blank(miss.created_at)).then_some(created_at),
        });

        let total_investors = raw.num_investors() as usize;
        let picked = index::sample(&mut re, cfg.params.investor_pool, total_investors).into_vec();
        let mut next_investor = picked.into_iter();
        for (k, (&amount, &inv)) in raw.round_amounts.iter().zip(&raw.investors_per_round).enumerate() {
            let round_id = format!("rnd-{i:06}-{k}");
            t.funding_rounds.push(FundingRoundRow {
                round_id: round_id.clone(),
                org_id: id.clone(),
                announced_on: Some(founded_on + Duration::days(re.gen_range(0..=raw.age_days))),
                raised_usd: (!blank(miss.raised_amount)).then_some(amount),
            });
            for j in next_investor.by_ref().take(inv as usize) {
                t.investments.push(InvestmentRow {
                    round_id: round_id.clone(),
                    investor_id: format!("inv-{j:05}"),
                });
            }
        }

        let mut titles: Vec<&str> = (0..raw.executives)
            .map(|_| EXECUTIVE_TITLES[rt.gen_range(0..EXECUTIVE_TITLES.len())])
            .collect();
        titles.extend((0..raw.other_jobs).map(|_| OTHER_TITLES[rt.gen_range(0..OTHER_TITLES.len())]));
        for (k, title) in titles.into_iter().enumerate() {
            t.jobs.push(JobRow {
                org_id: id.clone(),
                person_id: format!("per-{i:06}-{k}"),
                title: title.to_string(),
            });
        }
    }
    let event_date = |i: usize, rng: &mut rand_chacha::ChaCha8Rng| founded[i] + Duration::days(rng.gen_range(1..=raws[i].age_days));
    for &i in &events.ipos {
        let d = event_date(i, &mut re);
        t.ipos.push(IpoRow {
            org_id: org_id(i),
            went_public_on: (!blank(miss.event_date)).then_some(d),
        });
    }
    for &(acquiree, acquirer) in &events.acquisitions {
        let d = event_date(acquiree, &mut re);
        t.acquisitions.push(AcquisitionRow {
            acquiree_id: org_id(acquiree),
            acquirer_id: org_id(acquirer),
            announced_on: (!blank(miss.event_date)).then_some(d),
        });
    }
    let ground_truth = (0..n)
        .map(|i| GroundTruthRow {
            org_id: org_id(i),
            latent: latents[i],
            label: labels[i],
        })
        .collect();
    Ok(SynthCorpus {
        tables: t,
        ground_truth,
        intercept: mech.intercept,
    })
}

pub fn write_ground_truth<W: Write>(mut out: W, rows: &[GroundTruthRow]) -> std::io::Result<()> {
    for r in rows {
        writeln!(out, "{}", serde_json::to_string(r).map_err(std::io::Error::other)?)?;
    }
    out.flush()
}

pub fn read_ground_truth(path: &Path) -> Result<Vec<GroundTruthRow>, SynthError> {
    let text = std::fs::read_to_string(path).map_err(|e| SynthError::Io(format!("{}: {e}", path.display())))?;
    text.lines()
        .filter(|l| !l.trim().is_empty())
        .enumerate()
        .map(|(n, l)| serde_json::from_str(l).map_err(|e| SynthError::Io(format!("{} line {}: {e}", path.display(), n + 1))))
        .collect()
}

/// Writes the six tables under the default Crunchbase-style headers plus
/// `ground_truth.jsonl` into `out_dir`.
pub fn generate(cfg: &SynthConfig, out_dir: &Path) -> Result<SynthSummary, SynthError> {
    let corpus = synthesize(cfg)?;
    write_dir_mapped(out_dir, &corpus.tables, &ColumnMapping::crunchbase_default())
        .map_err(|e| SynthError::Io(e.to_string()))?;
    let path = out_dir.join(GROUND_TRUTH_FILE);
    let file = std::fs::File::create(&path).map_err(|e| SynthError::Io(format!("{}: {e}", path.display())))?;
    write_ground_truth(std::io::BufWriter::new(file), &corpus.ground_truth)
        .map_err(|e| SynthError::Io(format!("{}: {e}", path.display())))?;
    Ok(corpus.summary())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::features::ExecutiveTitles;
    use crate::synth::config::{MissingRates, NoiseMode};
    use std::collections::HashMap;

    fn small(n: usize) -> SynthConfig {
        SynthConfig {
            n_companies: n,
            ..SynthConfig::reference()
        }
    }

    #[test]
    fn title_lists_match_the_default_matcher() {
        let m = ExecutiveTitles::default();
        assert!(EXECUTIVE_TITLES.iter().all(|t| m.matches(t)));
        assert!(OTHER_TITLES.iter().all(|t| !m.matches(t)));
    }

    #[test]
    fn same_seed_same_corpus() {
        assert_eq!(synthesize(&small(50)).unwrap(), synthesize(&small(50)).unwrap());
        let other = SynthConfig { seed: 8, ..small(50) };
        assert_ne!(synthesize(&small(50)).unwrap(), synthesize(&other).unwrap());
    }

    #[test]
    fn empty_corpus() {
        let c = synthesize(&small(0)).unwrap();
        assert!(c.ground_truth.is_empty());
        assert_eq!(c.tables, Tables::default());
    }

    #[test]
    fn one_event_per_positive() {
        let c = synthesize(&small(800)).unwrap();
        let mut events: HashMap<&str, usize> = HashMap::new();
        for r in &c.tables.ipos {
            *events.entry(&r.org_id).or_default() += 1;
        }
        for r in &c.tables.acquisitions {
            *events.entry(&r.acquiree_id).or_default() += 1;
            assert_ne!(r.acquiree_id, r.acquirer_id);
        }
        for g in &c.ground_truth {
            let want = usize::from(g.label);
            assert_eq!(events.get(g.org_id.as_str()).copied().unwrap_or(0), want, "{}", g.org_id);
        }
        assert!(!c.tables.ipos.is_empty() && !c.tables.acquisitions.is_empty());
    }

    #[test]
    fn missingness_leaves_features_and_labels_alone() {
        let clean = SynthConfig {
            missing: MissingRates::none(),
            ..small(300)
        };
        let holey = SynthConfig {
            missing: MissingRates {
                founded_on: 0.5,
                created_at: 0.5,
                raised_amount: 0.5,
                description: 0.5,
                event_date: 0.5,
            },
            ..small(300)
        };
        let (a, b) = (synthesize(&clean).unwrap(), synthesize(&holey).unwrap());
        assert_eq!(a.ground_truth, b.ground_truth);
        assert_eq!(a.tables.investments, b.tables.investments);
        assert_eq!(a.tables.jobs, b.tables.jobs);
        assert_eq!(a.tables.funding_rounds.len(), b.tables.funding_rounds.len());
        assert!(b.tables.organizations.iter().any(|o| o.founded_on.is_none()));
        assert!(a.tables.organizations.iter().all(|o| o.founded_on.is_some()));
    }

    #[test]
    fn deterministic_labels_follow_latent_sign() {
        let cfg = SynthConfig {
            mode: NoiseMode::DeterministicThreshold,
            ..small(500)
        };
        for g in synthesize(&cfg).unwrap().ground_truth {
            assert_eq!(g.label, u8::from(g.latent > 0.0));
        }
    }

    #[test]
    fn dates_never_pass_the_reference() {
        let cfg = small(300);
        let c = synthesize(&cfg).unwrap();
        let r = cfg.reference_date;
        for o in &c.tables.organizations {
            assert!(o.founded_on.map_or(true, |d| d <= r));
            assert!(o.created_at.map_or(true, |d| d <= r));
        }
        assert!(c.tables.ipos.iter().all(|i| i.went_public_on.map_or(true, |d| d <= r)));
        assert!(c.tables.acquisitions.iter().all(|a| a.announced_on.map_or(true, |d| d <= r)));
    }
}
