//! Per-company feature derivation.

use std::collections::BTreeSet;

use chrono::NaiveDate;
use serde::{Deserialize, Serialize};

use super::FeatureError;
use crate::ingest::{CompanyStore, OrganizationRow};

/// Default reference date for age computation: the snapshot date of the
/// source data.
pub fn default_reference_date() -> NaiveDate {
    NaiveDate::from_ymd_opt(2025, 6, 11).expect("valid date")
}

/// Sentinel age for companies without a usable founding or creation date.
pub const AGE_UNKNOWN: f64 = -1.0;

pub const DAYS_PER_YEAR: f64 = 365.25;

/// Names of the numeric model features, in vector order.
pub const FEATURE_NAMES: [&str; 6] = [
    "age_years",
    "total_raised_usd",
    "num_funding_rounds",
    "num_investors",
    "num_acquisitions_made",
    "num_executives",
];

/// Where `age_years` came from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AgeSource {
    FoundedOn,
    CreatedAt,
    Missing,
    /// The only available date lies after the reference date.
    FutureDate,
}

/// One company's engineered features and label. Field order here is the
/// export order for CSV and JSONL.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CompanyProfile {
    pub org_id: String,
    pub name: String,
    pub description: String,
    pub age_years: f64,
    pub age_source: AgeSource,
    pub total_raised_usd: f64,
    /// No round reported an amount; `total_raised_usd` is the zero default.
    pub raised_imputed: bool,
    pub num_funding_rounds: u32,
    pub num_investors: u32,
    pub num_acquisitions_made: u32,
    pub num_executives: u32,
    pub had_ipo: u8,
    pub was_acquired: u8,
    pub success: u8,
}

impl CompanyProfile {
    /// The six numeric model inputs. Event flags are deliberately absent.
    pub fn feature_vector(&self) -> [f64; 6] {
        [
            self.age_years,
            self.total_raised_usd,
            f64::from(self.num_funding_rounds),
            f64::from(self.num_investors),
            f64::from(self.num_acquisitions_made),
            f64::from(self.num_executives),
        ]
    }

    pub fn age_known(&self) -> bool {
        self.age_years != AGE_UNKNOWN
    }
}

/// Fractional years between `founded_on` and `reference`, or the sentinel
/// when no date is available.
pub fn compute_age(founded_on: Option<NaiveDate>, reference: NaiveDate) -> Result<f64, FeatureError> {
    match founded_on {
        None => Ok(AGE_UNKNOWN),
        Some(d) if d > reference => Err(FeatureError::FutureDate {
            date: d,
            reference,
        }),
        Some(d) => Ok((reference - d).num_days() as f64 / DAYS_PER_YEAR),
    }
}

/// Case-insensitive executive-title matcher. A title matches when any
/// keyword appears as a whole word (or run of whole words) in it.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ExecutiveTitles {
    keywords: Vec<Vec<String>>,
}

pub const DEFAULT_EXECUTIVE_KEYWORDS: [&str; 9] = [
    "chief",
    "ceo",
    "cfo",
    "cto",
    "coo",
    "founder",
    "president",
    "vp",
    "vice president",
];

fn words(s: &str) -> Vec<String> {
    s.split(|c: char| !c.is_alphanumeric())
        .filter(|w| !w.is_empty())
        .map(str::to_lowercase)
        .collect()
}

impl Default for ExecutiveTitles {
    fn default() -> Self {
        Self::new(DEFAULT_EXECUTIVE_KEYWORDS)
    }
}

impl ExecutiveTitles {
    pub fn new<I, S>(keywords: I) -> Self
    where
        I: IntoIterator<Item = S>,
        S: AsRef<str>,
    {
        let keywords = keywords
            .into_iter()
            .map(|k| words(k.as_ref()))
            .filter(|w| !w.is_empty())
            .collect();
        ExecutiveTitles { keywords }
    }

    /// One keyword per line; `#` comments and blank lines are skipped.
    pub fn parse(text: &str) -> Self {
        Self::new(
            text.lines()
                .map(str::trim)
                .filter(|l| !l.is_empty() && !l.starts_with('#')),
        )
    }

    pub fn matches(&self, title: &str) -> bool {
        let w = words(title);
        self.keywords
            .iter()
            .any(|k| w.windows(k.len()).any(|win| win == k.as_slice()))
    }
}

/// True iff the company went public or was bought. Acquirer-only companies
/// are not successes.
pub fn derive_label(org_id: &str, store: &CompanyStore) -> u8 {
    let ipo = store.ipos_for(org_id).next().is_some();
    let acquired = store.acquisitions_of(org_id).next().is_some();
    u8::from(ipo || acquired)
}

/// Derives the full profile for one organization. Total: every missing
/// input falls back to its documented default.
pub fn derive_profile(
    org: &OrganizationRow,
    store: &CompanyStore,
    reference: NaiveDate,
    titles: &ExecutiveTitles,
) -> CompanyProfile {
    let (age_years, age_source) = match (org.founded_on, org.created_at) {
        (Some(d), _) if d <= reference => (compute_age(Some(d), reference), AgeSource::FoundedOn),
        (None, Some(d)) if d <= reference => (compute_age(Some(d), reference), AgeSource::CreatedAt),
        (Some(d), Some(c)) if d > reference && c <= reference => {
            (compute_age(Some(c), reference), AgeSource::CreatedAt)
        }
        (None, None) => (Ok(AGE_UNKNOWN), AgeSource::Missing),
        _ => (Ok(AGE_UNKNOWN), AgeSource::FutureDate),
    };
    let age_years = age_years.unwrap_or(AGE_UNKNOWN);

    let mut total_raised = 0.0;
    let mut any_amount = false;
    let mut rounds = 0u32;
    let mut investors: BTreeSet<&str> = BTreeSet::new();
    for r in store.rounds_for(&org.org_id) {
        rounds += 1;
        if let Some(x) = r.raised_usd {
            total_raised += x;
            any_amount = true;
        }
        investors.extend(
            store
                .investments_for_round(&r.round_id)
                .map(|i| i.investor_id.as_str()),
        );
    }

    let had_ipo = u8::from(store.ipos_for(&org.org_id).next().is_some());
    let was_acquired = u8::from(store.acquisitions_of(&org.org_id).next().is_some());

    CompanyProfile {
        org_id: org.org_id.clone(),
        name: org.name.clone(),
        description: org.description.clone(),
        age_years,
        age_source,
        total_raised_usd: total_raised,
        raised_imputed: !any_amount,
        num_funding_rounds: rounds,
        num_investors: investors.len() as u32,
        num_acquisitions_made: store.acquisitions_by(&org.org_id).count() as u32,
        num_executives: store
            .jobs_for(&org.org_id)
            .filter(|j| titles.matches(&j.title))
            .count() as u32,
        had_ipo,
        was_acquired,
        success: had_ipo | was_acquired,
    }
}

/// Profiles for every organization in store order.
pub fn derive_all(
    store: &CompanyStore,
    reference: NaiveDate,
    titles: &ExecutiveTitles,
) -> Vec<CompanyProfile> {
    store
        .organizations()
        .iter()
        .map(|o| derive_profile(o, store, reference, titles))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ingest::{
        AcquisitionRow, FundingRoundRow, InvestmentRow, IpoRow, JobRow, Tables,
    };

    fn date(s: &str) -> NaiveDate {
        NaiveDate::parse_from_str(s, "%Y-%m-%d").unwrap()
    }

    fn org(id: &str) -> OrganizationRow {
        OrganizationRow {
            org_id: id.into(),
            name: format!("Org {id}"),
            description: String::new(),
            founded_on: None,
            created_at: None,
        }
    }

    fn acq(acquiree: &str, acquirer: &str) -> AcquisitionRow {
        AcquisitionRow {
            acquiree_id: acquiree.into(),
            acquirer_id: acquirer.into(),
            announced_on: None,
        }
    }

    #[test]
    fn age_examples() {
        let r = date("2025-06-11");
        let five = compute_age(Some(date("2020-06-11")), r).unwrap();
        // 1826 days (two leap days) / 365.25
        assert!((five - 1826.0 / 365.25).abs() < 1e-12);
        assert!((five - 5.0).abs() < 0.01);
        assert_eq!(compute_age(None, r).unwrap(), -1.0);
        assert_eq!(compute_age(Some(r), r).unwrap(), 0.0);
        assert!(matches!(
            compute_age(Some(date("2025-06-12")), r),
            Err(FeatureError::FutureDate { .. })
        ));
    }

    #[test]
    fn bare_org_gets_all_defaults() {
        let store = CompanyStore::build(Tables {
            organizations: vec![org("c1")],
            ..Default::default()
        });
        let p = derive_profile(&store.organizations()[0], &store, default_reference_date(), &ExecutiveTitles::default());
        assert_eq!(p.age_years, -1.0);
        assert_eq!(p.age_source, AgeSource::Missing);
        assert_eq!(p.total_raised_usd, 0.0);
        assert!(p.raised_imputed);
        assert_eq!(
            (p.num_funding_rounds, p.num_investors, p.num_acquisitions_made, p.num_executives),
            (0, 0, 0, 0)
        );
        assert_eq!((p.had_ipo, p.was_acquired, p.success), (0, 0, 0));
    }

    #[test]
    fn funding_and_distinct_investors() {
        let round = |id: &str, amt| FundingRoundRow {
            round_id: id.into(),
            org_id: "c1".into(),
            announced_on: None,
            raised_usd: Some(amt),
        };
        let inv = |r: &str, i: &str| InvestmentRow {
            round_id: r.into(),
            investor_id: i.into(),
        };
        let store = CompanyStore::build(Tables {
            organizations: vec![org("c1")],
            funding_rounds: vec![round("r1", 1_000_000.0), round("r2", 2_500_000.0)],
            investments: vec![inv("r1", "a"), inv("r2", "a"), inv("r2", "b")],
            ..Default::default()
        });
        let p = derive_profile(&store.organizations()[0], &store, default_reference_date(), &ExecutiveTitles::default());
        assert_eq!(p.total_raised_usd, 3_500_000.0);
        assert_eq!(p.num_funding_rounds, 2);
        assert_eq!(p.num_investors, 2);
        assert!(!p.raised_imputed);
    }

    #[test]
    fn acquirer_role_counts_but_is_not_success() {
        let store = CompanyStore::build(Tables {
            organizations: vec![org("c1"), org("t1"), org("t2")],
            acquisitions: vec![acq("t1", "c1"), acq("t2", "c1")],
            ..Default::default()
        });
        let titles = ExecutiveTitles::default();
        let p = derive_profile(&store.organizations()[0], &store, default_reference_date(), &titles);
        assert_eq!(p.num_acquisitions_made, 2);
        assert_eq!(p.success, 0);
        assert_eq!(derive_label("c1", &store), 0);
        assert_eq!(derive_label("t1", &store), 1);
        let t1 = derive_profile(&store.organizations()[1], &store, default_reference_date(), &titles);
        assert_eq!((t1.was_acquired, t1.success), (1, 1));
    }

    #[test]
    fn ipo_label() {
        let store = CompanyStore::build(Tables {
            organizations: vec![org("c1"), org("c2")],
            ipos: vec![IpoRow {
                org_id: "c1".into(),
                went_public_on: None,
            }],
            ..Default::default()
        });
        assert_eq!(derive_label("c1", &store), 1);
        assert_eq!(derive_label("c2", &store), 0);
        assert_eq!(derive_label("nobody", &store), 0);
    }

    #[test]
    fn age_source_fallbacks() {
        let r = default_reference_date();
        let titles = ExecutiveTitles::default();
        let mut o = org("c1");
        o.created_at = Some(date("2021-06-11"));
        let store = CompanyStore::build(Tables::default());
        let p = derive_profile(&o, &store, r, &titles);
        assert_eq!(p.age_source, AgeSource::CreatedAt);
        assert!((p.age_years - 4.0).abs() < 0.01);

        o.founded_on = Some(date("2030-01-01"));
        let p = derive_profile(&o, &store, r, &titles);
        assert_eq!(p.age_source, AgeSource::CreatedAt);

        o.created_at = None;
        let p = derive_profile(&o, &store, r, &titles);
        assert_eq!((p.age_years, p.age_source), (-1.0, AgeSource::FutureDate));
    }

    #[test]
    fn executive_titles() {
        let t = ExecutiveTitles::default();
        for title in ["CEO", "Co-Founder", "Chief Revenue Officer", "VP Sales", "Vice President, Ops", "president"] {
            assert!(t.matches(title), "{title}");
        }
        for title in ["Software Engineer", "MVP Lead", "Director", "", "Account Executive"] {
            assert!(!t.matches(title), "{title}");
        }
        let custom = ExecutiveTitles::parse("# exec list\nhead of\n\n");
        assert!(custom.matches("Head of Product"));
        assert!(!custom.matches("CEO"));
    }

    #[test]
    fn executives_counted_from_jobs() {
        let job = |p: &str, t: &str| JobRow {
            org_id: "c1".into(),
            person_id: p.into(),
            title: t.into(),
        };
        let store = CompanyStore::build(Tables {
            organizations: vec![org("c1")],
            jobs: vec![job("p1", "CEO"), job("p2", "Engineer"), job("p3", "CTO")],
            ..Default::default()
        });
        let p = derive_profile(&store.organizations()[0], &store, default_reference_date(), &ExecutiveTitles::default());
        assert_eq!(p.num_executives, 2);
    }
}
