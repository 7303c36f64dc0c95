//! Logical-to-physical column mapping.

use std::collections::BTreeMap;
use std::fmt;
use std::path::Path;
use std::str::FromStr;

use super::IngestError;

/// The six relational tables the pipeline reads.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum TableKind {
    Organizations,
    FundingRounds,
    Investments,
    Ipos,
    Acquisitions,
    Jobs,
}

impl TableKind {
    pub const ALL: [TableKind; 6] = [
        TableKind::Organizations,
        TableKind::FundingRounds,
        TableKind::Investments,
        TableKind::Ipos,
        TableKind::Acquisitions,
        TableKind::Jobs,
    ];

    pub fn name(self) -> &'static str {
        match self {
            TableKind::Organizations => "organizations",
            TableKind::FundingRounds => "funding_rounds",
            TableKind::Investments => "investments",
            TableKind::Ipos => "ipos",
            TableKind::Acquisitions => "acquisitions",
            TableKind::Jobs => "jobs",
        }
    }

    pub fn file_name(self) -> String {
        format!("{}.csv", self.name())
    }

    /// Logical columns in canonical (identity-mapping) order.
    pub fn columns(self) -> &'static [&'static str] {
        match self {
            TableKind::Organizations => &["org_id", "name", "description", "founded_on", "created_at"],
            TableKind::FundingRounds => &["round_id", "org_id", "announced_on", "raised_usd"],
            TableKind::Investments => &["round_id", "investor_id"],
            TableKind::Ipos => &["org_id", "went_public_on"],
            TableKind::Acquisitions => &["acquiree_id", "acquirer_id", "announced_on"],
            TableKind::Jobs => &["org_id", "person_id", "title"],
        }
    }

    /// Columns a mapping must cover for this table to load.
    pub fn required_columns(self) -> &'static [&'static str] {
        match self {
            TableKind::Organizations => &["org_id", "name"],
            TableKind::FundingRounds => &["round_id", "org_id"],
            TableKind::Investments => &["round_id", "investor_id"],
            TableKind::Ipos => &["org_id"],
            TableKind::Acquisitions => &["acquiree_id", "acquirer_id"],
            TableKind::Jobs => &["org_id", "person_id"],
        }
    }
}

impl fmt::Display for TableKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for TableKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        TableKind::ALL
            .into_iter()
            .find(|k| k.name() == s)
            .ok_or_else(|| format!("unknown table `{s}`"))
    }
}

/// Maps `(table, logical column)` to the physical header name in a CSV file.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct ColumnMapping {
    entries: BTreeMap<(TableKind, String), String>,
}

const DEFAULT_MAPPING: &str = include_str!("../../mappings/default.map");

impl ColumnMapping {
    /// Physical names equal logical names, for files this tool wrote itself.
    pub fn identity() -> Self {
        let mut entries = BTreeMap::new();
        for kind in TableKind::ALL {
            for col in kind.columns() {
                entries.insert((kind, (*col).to_string()), (*col).to_string());
            }
        }
        ColumnMapping { entries }
    }

    /// The checked-in Crunchbase export mapping.
    pub fn crunchbase_default() -> Self {
        Self::parse(DEFAULT_MAPPING).expect("bundled mapping file is valid")
    }

    pub fn from_file(path: &Path) -> Result<Self, IngestError> {
        let text = std::fs::read_to_string(path).map_err(|source| IngestError::Io {
            path: path.to_path_buf(),
            source,
        })?;
        Self::parse(&text)
    }

    /// Parses `table.logical = physical` lines.
    pub fn parse(text: &str) -> Result<Self, IngestError> {
        let mut entries = BTreeMap::new();
        for (idx, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let bad = |reason: String| IngestError::Mapping { line: idx + 1, reason };
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| bad("expected `table.column = header`".into()))?;
            let (table, logical) = key
                .trim()
                .split_once('.')
                .ok_or_else(|| bad(format!("key `{}` lacks a table prefix", key.trim())))?;
            let kind: TableKind = table.parse().map_err(bad)?;
            if !kind.columns().contains(&logical) {
                return Err(bad(format!("`{logical}` is not a column of {kind}")));
            }
            let physical = value.trim();
            if physical.is_empty() {
                return Err(bad("empty physical column name".into()));
            }
            entries.insert((kind, logical.to_string()), physical.to_string());
        }
        Ok(ColumnMapping { entries })
    }

    /// Layers `other` on top of `self`; entries in `other` win.
    pub fn overlay(mut self, other: &ColumnMapping) -> Self {
        for (k, v) in &other.entries {
            self.entries.insert(k.clone(), v.clone());
        }
        self
    }

    pub fn physical(&self, kind: TableKind, logical: &str) -> Option<&str> {
        self.entries
            .get(&(kind, logical.to_string()))
            .map(String::as_str)
    }

    pub fn set(&mut self, kind: TableKind, logical: &str, physical: &str) {
        self.entries
            .insert((kind, logical.to_string()), physical.to_string());
    }

    pub fn remove(&mut self, kind: TableKind, logical: &str) {
        self.entries.remove(&(kind, logical.to_string()));
    }

    /// Renders back to the key-value text format.
    pub fn to_text(&self) -> String {
        self.entries
            .iter()
            .map(|((kind, logical), physical)| format!("{kind}.{logical} = {physical}\n"))
            .collect()
    }
}
