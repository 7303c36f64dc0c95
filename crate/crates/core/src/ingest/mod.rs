//! Relational CSV ingest: column mapping, typed row loading with per-row
//! error accounting, and the indexed [`CompanyStore`].

mod mapping;
mod store;
mod table;

use std::path::{Path, PathBuf};

use serde::Serialize;
use thiserror::Error;

pub use mapping::{ColumnMapping, TableKind};
pub use store::{CompanyStore, IntegritySummary, Tables};
pub use table::{
    load_table, load_table_from_reader, parse_date, write_table, write_table_file,
    write_table_file_mapped, write_table_mapped,
    AcquisitionRow, Fields, FundingRoundRow, InvestmentRow, IpoRow, JobRow, LoadOptions, Loaded,
    OrganizationRow, RowError, TableRow,
};

#[derive(Debug, Error)]
pub enum IngestError {
    #[error("cannot read {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}: {reason}")]
    Csv { path: PathBuf, reason: String },
    #[error("{path}: header row missing")]
    MissingHeader { path: PathBuf },
    #[error("{path}: column `{column}` required by the {table} mapping is not in the header")]
    MissingColumn {
        path: PathBuf,
        table: TableKind,
        column: String,
    },
    #[error("mapping does not cover required column {table}.{column}")]
    UnmappedColumn { table: TableKind, column: String },
    #[error("mapping line {line}: {reason}")]
    Mapping { line: usize, reason: String },
    #[error("strict mode: {} line {}: {}", .0.table, .0.line, .0.reason)]
    StrictRow(RowError),
}

/// Everything a directory load produced.
#[derive(Debug, Clone, Default)]
pub struct IngestResult {
    pub tables: Tables,
    pub row_errors: Vec<RowError>,
}

/// Per-table row/error counts, serialised into the ingest report.
#[derive(Debug, Clone, Serialize, PartialEq, Eq)]
pub struct TableCounts {
    pub table: String,
    pub rows: usize,
    pub errors: usize,
}

impl IngestResult {
    pub fn counts(&self) -> Vec<TableCounts> {
        let rows = [
            self.tables.organizations.len(),
            self.tables.funding_rounds.len(),
            self.tables.investments.len(),
            self.tables.ipos.len(),
            self.tables.acquisitions.len(),
            self.tables.jobs.len(),
        ];
        TableKind::ALL
            .iter()
            .zip(rows)
            .map(|(kind, rows)| TableCounts {
                table: kind.name().into(),
                rows,
                errors: self
                    .row_errors
                    .iter()
                    .filter(|e| e.table == kind.name())
                    .count(),
            })
            .collect()
    }
}

fn load_into<R: TableRow + Send>(
    dir: &Path,
    mapping: &ColumnMapping,
    opts: LoadOptions,
) -> Result<Loaded<R>, IngestError> {
    load_table::<R>(&dir.join(R::KIND.file_name()), mapping, opts)
}

/// Loads all six `<table>.csv` files from `dir`, one thread per table.
pub fn load_dir(
    dir: &Path,
    mapping: &ColumnMapping,
    opts: LoadOptions,
) -> Result<IngestResult, IngestError> {
    fn join<T>(h: std::thread::ScopedJoinHandle<'_, T>) -> T {
        h.join().expect("loader thread panicked")
    }
    std::thread::scope(|s| {
        let orgs = s.spawn(|| load_into::<OrganizationRow>(dir, mapping, opts));
        let rounds = s.spawn(|| load_into::<FundingRoundRow>(dir, mapping, opts));
        let invs = s.spawn(|| load_into::<InvestmentRow>(dir, mapping, opts));
        let ipos = s.spawn(|| load_into::<IpoRow>(dir, mapping, opts));
        let acqs = s.spawn(|| load_into::<AcquisitionRow>(dir, mapping, opts));
        let jobs = s.spawn(|| load_into::<JobRow>(dir, mapping, opts));
        let orgs: Loaded<OrganizationRow> = join(orgs)?;
        let rounds: Loaded<FundingRoundRow> = join(rounds)?;
        let invs: Loaded<InvestmentRow> = join(invs)?;
        let ipos: Loaded<IpoRow> = join(ipos)?;
        let acqs: Loaded<AcquisitionRow> = join(acqs)?;
        let jobs: Loaded<JobRow> = join(jobs)?;

        let mut row_errors = Vec::new();
        row_errors.extend(orgs.errors);
        row_errors.extend(rounds.errors);
        row_errors.extend(invs.errors);
        row_errors.extend(ipos.errors);
        row_errors.extend(acqs.errors);
        row_errors.extend(jobs.errors);
        Ok(IngestResult {
            tables: Tables {
                organizations: orgs.rows,
                funding_rounds: rounds.rows,
                investments: invs.rows,
                ipos: ipos.rows,
                acquisitions: acqs.rows,
                jobs: jobs.rows,
            },
            row_errors,
        })
    })
}

/// Writes all six tables under the identity mapping into `dir`.
pub fn write_dir(dir: &Path, tables: &Tables) -> Result<(), IngestError> {
    write_dir_mapped(dir, tables, &ColumnMapping::identity())
}

/// Writes all six tables into `dir` with headers from `mapping`.
pub fn write_dir_mapped(dir: &Path, tables: &Tables, mapping: &ColumnMapping) -> Result<(), IngestError> {
    std::fs::create_dir_all(dir).map_err(|source| IngestError::Io {
        path: dir.to_path_buf(),
        source,
    })?;
    let path = |k: TableKind| dir.join(k.file_name());
    write_table_file_mapped(&path(TableKind::Organizations), &tables.organizations, mapping)?;
    write_table_file_mapped(&path(TableKind::FundingRounds), &tables.funding_rounds, mapping)?;
    write_table_file_mapped(&path(TableKind::Investments), &tables.investments, mapping)?;
    write_table_file_mapped(&path(TableKind::Ipos), &tables.ipos, mapping)?;
    write_table_file_mapped(&path(TableKind::Acquisitions), &tables.acquisitions, mapping)?;
    write_table_file_mapped(&path(TableKind::Jobs), &tables.jobs, mapping)?;
    Ok(())
}
