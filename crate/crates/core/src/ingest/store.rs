//! Indexed, immutable view over the loaded tables.

use std::collections::{HashMap, HashSet};

use serde::Serialize;

use super::table::{
    AcquisitionRow, FundingRoundRow, InvestmentRow, IpoRow, JobRow, OrganizationRow,
};

/// Rows of all six tables, as loaded.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Tables {
    pub organizations: Vec<OrganizationRow>,
    pub funding_rounds: Vec<FundingRoundRow>,
    pub investments: Vec<InvestmentRow>,
    pub ipos: Vec<IpoRow>,
    pub acquisitions: Vec<AcquisitionRow>,
    pub jobs: Vec<JobRow>,
}

/// Dangling foreign keys found while indexing. Rows stay in the store.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize)]
pub struct IntegritySummary {
    pub rounds_unknown_org: usize,
    pub investments_unknown_round: usize,
    pub ipos_unknown_org: usize,
    pub acquisitions_unknown_acquiree: usize,
    pub acquisitions_unknown_acquirer: usize,
    pub jobs_unknown_org: usize,
    /// Up to ten offending keys per category, for diagnostics.
    pub examples: Vec<String>,
}

impl IntegritySummary {
    pub fn total(&self) -> usize {
        self.rounds_unknown_org
            + self.investments_unknown_round
            + self.ipos_unknown_org
            + self.acquisitions_unknown_acquiree
            + self.acquisitions_unknown_acquirer
            + self.jobs_unknown_org
    }

    pub fn is_clean(&self) -> bool {
        self.total() == 0
    }
}

const MAX_EXAMPLES: usize = 10;

type Index = HashMap<String, Vec<usize>>;

#[derive(Debug, Clone, Default)]
pub struct CompanyStore {
    tables: Tables,
    org_index: HashMap<String, usize>,
    rounds_by_org: Index,
    investments_by_round: Index,
    ipos_by_org: Index,
    acquisitions_by_acquiree: Index,
    acquisitions_by_acquirer: Index,
    jobs_by_org: Index,
    integrity: IntegritySummary,
}

fn index_by<'a, R: 'a>(rows: &'a [R], key: impl Fn(&'a R) -> &'a str) -> Index {
    let mut idx: Index = HashMap::new();
    for (i, r) in rows.iter().enumerate() {
        idx.entry(key(r).to_string()).or_default().push(i);
    }
    idx
}

fn lookup<'a, R>(rows: &'a [R], idx: &'a Index, key: &str) -> impl Iterator<Item = &'a R> + 'a {
    idx.get(key)
        .map(|v| v.as_slice())
        .unwrap_or(&[])
        .iter()
        .map(move |&i| &rows[i])
}

impl CompanyStore {
    pub fn build(tables: Tables) -> Self {
        let org_index: HashMap<String, usize> = tables
            .organizations
            .iter()
            .enumerate()
            .map(|(i, o)| (o.org_id.clone(), i))
            .collect();
        let round_ids: HashSet<&str> = tables
            .funding_rounds
            .iter()
            .map(|r| r.round_id.as_str())
            .collect();

        let mut integrity = IntegritySummary::default();
        let note = |count: &mut usize, what: &str, key: &str| {
            *count += 1;
            (*count <= MAX_EXAMPLES).then(|| format!("{what}: {key}"))
        };
        let mut examples = Vec::new();
        for r in &tables.funding_rounds {
            if !org_index.contains_key(&r.org_id) {
                examples.extend(note(&mut integrity.rounds_unknown_org, "round org", &r.org_id));
            }
        }
        for r in &tables.investments {
            if !round_ids.contains(r.round_id.as_str()) {
                examples.extend(note(
                    &mut integrity.investments_unknown_round,
                    "investment round",
                    &r.round_id,
                ));
            }
        }
        for r in &tables.ipos {
            if !org_index.contains_key(&r.org_id) {
                examples.extend(note(&mut integrity.ipos_unknown_org, "ipo org", &r.org_id));
            }
        }
        for r in &tables.acquisitions {
            if !org_index.contains_key(&r.acquiree_id) {
                examples.extend(note(
                    &mut integrity.acquisitions_unknown_acquiree,
                    "acquiree",
                    &r.acquiree_id,
                ));
            }
            if !org_index.contains_key(&r.acquirer_id) {
                examples.extend(note(
                    &mut integrity.acquisitions_unknown_acquirer,
                    "acquirer",
                    &r.acquirer_id,
                ));
            }
        }
        for r in &tables.jobs {
            if !org_index.contains_key(&r.org_id) {
                examples.extend(note(&mut integrity.jobs_unknown_org, "job org", &r.org_id));
            }
        }
        integrity.examples = examples;

        CompanyStore {
            rounds_by_org: index_by(&tables.funding_rounds, |r| &r.org_id),
            investments_by_round: index_by(&tables.investments, |r| &r.round_id),
            ipos_by_org: index_by(&tables.ipos, |r| &r.org_id),
            acquisitions_by_acquiree: index_by(&tables.acquisitions, |r| &r.acquiree_id),
            acquisitions_by_acquirer: index_by(&tables.acquisitions, |r| &r.acquirer_id),
            jobs_by_org: index_by(&tables.jobs, |r| &r.org_id),
            org_index,
            integrity,
            tables,
        }
    }

    pub fn tables(&self) -> &Tables {
        &self.tables
    }

    pub fn organizations(&self) -> &[OrganizationRow] {
        &self.tables.organizations
    }

    pub fn organization(&self, org_id: &str) -> Option<&OrganizationRow> {
        self.org_index
            .get(org_id)
            .map(|&i| &self.tables.organizations[i])
    }

    pub fn integrity(&self) -> &IntegritySummary {
        &self.integrity
    }

    pub fn rounds_for<'a>(&'a self, org_id: &str) -> impl Iterator<Item = &'a FundingRoundRow> + 'a {
        lookup(&self.tables.funding_rounds, &self.rounds_by_org, org_id)
    }

    pub fn investments_for_round<'a>(
        &'a self,
        round_id: &str,
    ) -> impl Iterator<Item = &'a InvestmentRow> + 'a {
        lookup(&self.tables.investments, &self.investments_by_round, round_id)
    }

    pub fn ipos_for<'a>(&'a self, org_id: &str) -> impl Iterator<Item = &'a IpoRow> + 'a {
        lookup(&self.tables.ipos, &self.ipos_by_org, org_id)
    }

    /// Acquisitions in which `org_id` was bought.
    pub fn acquisitions_of<'a>(
        &'a self,
        org_id: &str,
    ) -> impl Iterator<Item = &'a AcquisitionRow> + 'a {
        lookup(&self.tables.acquisitions, &self.acquisitions_by_acquiree, org_id)
    }

    /// Acquisitions in which `org_id` was the buyer.
    pub fn acquisitions_by<'a>(
        &'a self,
        org_id: &str,
    ) -> impl Iterator<Item = &'a AcquisitionRow> + 'a {
        lookup(&self.tables.acquisitions, &self.acquisitions_by_acquirer, org_id)
    }

    pub fn jobs_for<'a>(&'a self, org_id: &str) -> impl Iterator<Item = &'a JobRow> + 'a {
        lookup(&self.tables.jobs, &self.jobs_by_org, org_id)
    }
}
