//! Typed rows and the CSV loader.

use std::collections::HashSet;
use std::fs::File;
use std::io::{Read, Write};
use std::path::Path;

use chrono::NaiveDate;
use serde::Serialize;

use super::mapping::{ColumnMapping, TableKind};
use super::IngestError;

#[derive(Debug, Clone, PartialEq)]
pub struct OrganizationRow {
    pub org_id: String,
    pub name: String,
    pub description: String,
    pub founded_on: Option<NaiveDate>,
    pub created_at: Option<NaiveDate>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FundingRoundRow {
    pub round_id: String,
    pub org_id: String,
    pub announced_on: Option<NaiveDate>,
    pub raised_usd: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct InvestmentRow {
    pub round_id: String,
    pub investor_id: String,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct IpoRow {
    pub org_id: String,
    pub went_public_on: Option<NaiveDate>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AcquisitionRow {
    pub acquiree_id: String,
    pub acquirer_id: String,
    pub announced_on: Option<NaiveDate>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct JobRow {
    pub org_id: String,
    pub person_id: String,
    pub title: String,
}

/// A data line that failed to parse. `line` is 1-based and counts the header.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct RowError {
    pub table: String,
    pub line: u64,
    pub reason: String,
}

#[derive(Debug, Clone, Copy, Default)]
pub struct LoadOptions {
    /// Promote the first per-row failure to a fatal error.
    pub strict: bool,
}

#[derive(Debug, Clone)]
pub struct Loaded<R> {
    pub rows: Vec<R>,
    pub errors: Vec<RowError>,
}

/// Column lookup over one CSV record after header resolution.
pub struct Fields<'a> {
    values: &'a [String],
    positions: &'a [Option<usize>],
    columns: &'static [&'static str],
}

impl Fields<'_> {
    fn raw(&self, logical: &str) -> &str {
        let idx = self
            .columns
            .iter()
            .position(|c| *c == logical)
            .expect("logical column declared by the table kind");
        match self.positions[idx] {
            Some(p) => self.values.get(p).map(|s| s.trim()).unwrap_or(""),
            None => "",
        }
    }

    pub fn required(&self, logical: &str) -> Result<String, String> {
        let v = self.raw(logical);
        if v.is_empty() {
            Err(format!("`{logical}` is empty"))
        } else {
            Ok(v.to_string())
        }
    }

    pub fn text(&self, logical: &str) -> String {
        self.raw(logical).to_string()
    }

    pub fn date(&self, logical: &str) -> Result<Option<NaiveDate>, String> {
        parse_date(self.raw(logical)).map_err(|e| format!("`{logical}`: {e}"))
    }

    pub fn amount(&self, logical: &str) -> Result<Option<f64>, String> {
        let v = self.raw(logical);
        if v.is_empty() {
            return Ok(None);
        }
        let x: f64 = v
            .parse()
            .map_err(|_| format!("`{logical}`: `{v}` is not a number"))?;
        if !x.is_finite() || x < 0.0 {
            return Err(format!("`{logical}`: amount must be finite and non-negative, got `{v}`"));
        }
        Ok(Some(x))
    }
}

/// Parses an ISO-8601 calendar date. Timestamps (`2020-06-11T08:00:00Z`,
/// `2020-06-11 08:00:00`) are truncated to their date part.
pub fn parse_date(s: &str) -> Result<Option<NaiveDate>, String> {
    let s = s.trim();
    if s.is_empty() {
        return Ok(None);
    }
    let date_part = match s.as_bytes().get(10) {
        None => s,
        Some(b'T') | Some(b' ') => &s[..10],
        Some(_) => return Err(format!("`{s}` is not a YYYY-MM-DD date")),
    };
    if date_part.len() != 10 {
        return Err(format!("`{s}` is not a YYYY-MM-DD date"));
    }
    NaiveDate::parse_from_str(date_part, "%Y-%m-%d")
        .map(Some)
        .map_err(|_| format!("`{s}` is not a valid YYYY-MM-DD date"))
}

fn fmt_date(d: &Option<NaiveDate>) -> String {
    d.map(|d| d.format("%Y-%m-%d").to_string()).unwrap_or_default()
}

fn fmt_amount(a: &Option<f64>) -> String {
    a.map(|a| a.to_string()).unwrap_or_default()
}

/// A row type backed by one table kind.
pub trait TableRow: Sized + Clone {
    const KIND: TableKind;

    fn from_fields(f: &Fields<'_>) -> Result<Self, String>;

    /// Values in `KIND.columns()` order, for writing under the identity mapping.
    fn to_values(&self) -> Vec<String>;

    /// Key that must be unique within one load, if any.
    fn unique_key(&self) -> Option<&str> {
        None
    }
}

impl TableRow for OrganizationRow {
    const KIND: TableKind = TableKind::Organizations;

    fn from_fields(f: &Fields<'_>) -> Result<Self, String> {
        Ok(OrganizationRow {
            org_id: f.required("org_id")?,
            name: f.text("name"),
            description: f.text("description"),
            founded_on: f.date("founded_on")?,
            created_at: f.date("created_at")?,
        })
    }

    fn to_values(&self) -> Vec<String> {
        vec![
            self.org_id.clone(),
            self.name.clone(),
            self.description.clone(),
            fmt_date(&self.founded_on),
            fmt_date(&self.created_at),
        ]
    }

    fn unique_key(&self) -> Option<&str> {
        Some(&self.org_id)
    }
}

impl TableRow for FundingRoundRow {
    const KIND: TableKind = TableKind::FundingRounds;

    fn from_fields(f: &Fields<'_>) -> Result<Self, String> {
        Ok(FundingRoundRow {
            round_id: f.required("round_id")?,
            org_id: f.required("org_id")?,
            announced_on: f.date("announced_on")?,
            raised_usd: f.amount("raised_usd")?,
        })
    }

    fn to_values(&self) -> Vec<String> {
        vec![
            self.round_id.clone(),
            self.org_id.clone(),
            fmt_date(&self.announced_on),
            fmt_amount(&self.raised_usd),
        ]
    }

    fn unique_key(&self) -> Option<&str> {
        Some(&self.round_id)
    }
}

impl TableRow for InvestmentRow {
    const KIND: TableKind = TableKind::Investments;

    fn from_fields(f: &Fields<'_>) -> Result<Self, String> {
        Ok(InvestmentRow {
            round_id: f.required("round_id")?,
            investor_id: f.required("investor_id")?,
        })
    }

    fn to_values(&self) -> Vec<String> {
        vec![self.round_id.clone(), self.investor_id.clone()]
    }
}

impl TableRow for IpoRow {
    const KIND: TableKind = TableKind::Ipos;

    fn from_fields(f: &Fields<'_>) -> Result<Self, String> {
        Ok(IpoRow {
            org_id: f.required("org_id")?,
            went_public_on: f.date("went_public_on")?,
        })
    }

    fn to_values(&self) -> Vec<String> {
        vec![self.org_id.clone(), fmt_date(&self.went_public_on)]
    }
}

impl TableRow for AcquisitionRow {
    const KIND: TableKind = TableKind::Acquisitions;

    fn from_fields(f: &Fields<'_>) -> Result<Self, String> {
        let row = AcquisitionRow {
            acquiree_id: f.required("acquiree_id")?,
            acquirer_id: f.required("acquirer_id")?,
            announced_on: f.date("announced_on")?,
        };
        if row.acquiree_id == row.acquirer_id {
            return Err(format!("company `{}` cannot acquire itself", row.acquiree_id));
        }
        Ok(row)
    }

    fn to_values(&self) -> Vec<String> {
        vec![
            self.acquiree_id.clone(),
            self.acquirer_id.clone(),
            fmt_date(&self.announced_on),
        ]
    }
}

impl TableRow for JobRow {
    const KIND: TableKind = TableKind::Jobs;

    fn from_fields(f: &Fields<'_>) -> Result<Self, String> {
        Ok(JobRow {
            org_id: f.required("org_id")?,
            person_id: f.required("person_id")?,
            title: f.text("title"),
        })
    }

    fn to_values(&self) -> Vec<String> {
        vec![self.org_id.clone(), self.person_id.clone(), self.title.clone()]
    }
}

/// Loads one table from `path`.
pub fn load_table<R: TableRow>(
    path: &Path,
    mapping: &ColumnMapping,
    opts: LoadOptions,
) -> Result<Loaded<R>, IngestError> {
    let file = File::open(path).map_err(|source| IngestError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    load_table_from_reader(file, path, mapping, opts)
}

/// Loads one table from any reader; `origin` is used only in error messages.
pub fn load_table_from_reader<R: TableRow, S: Read>(
    source: S,
    origin: &Path,
    mapping: &ColumnMapping,
    opts: LoadOptions,
) -> Result<Loaded<R>, IngestError> {
    let kind = R::KIND;
    let io_err = |e: csv::Error| IngestError::Csv {
        path: origin.to_path_buf(),
        reason: e.to_string(),
    };
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .flexible(true)
        .from_reader(source);

    let header: Vec<String> = reader
        .byte_headers()
        .map_err(io_err)?
        .iter()
        .map(|h| String::from_utf8_lossy(h).trim().trim_start_matches('\u{feff}').to_string())
        .collect();
    if header.iter().all(|h| h.is_empty()) {
        return Err(IngestError::MissingHeader {
            path: origin.to_path_buf(),
        });
    }

    for col in kind.required_columns() {
        if mapping.physical(kind, col).is_none() {
            return Err(IngestError::UnmappedColumn {
                table: kind,
                column: (*col).to_string(),
            });
        }
    }
    let mut positions = Vec::with_capacity(kind.columns().len());
    for col in kind.columns() {
        match mapping.physical(kind, col) {
            None => positions.push(None),
            Some(physical) => match header.iter().position(|h| h == physical) {
                Some(p) => positions.push(Some(p)),
                None => {
                    return Err(IngestError::MissingColumn {
                        path: origin.to_path_buf(),
                        table: kind,
                        column: physical.to_string(),
                    })
                }
            },
        }
    }

    let mut rows = Vec::new();
    let mut errors = Vec::new();
    let mut seen_keys: HashSet<String> = HashSet::new();
    let mut record = csv::ByteRecord::new();
    loop {
        match reader.read_byte_record(&mut record) {
            Ok(false) => break,
            Ok(true) => {}
            Err(e) => {
                // Malformed quoting and the like are per-row failures.
                let line = e.position().map(|p| p.line()).unwrap_or(0);
                let err = RowError {
                    table: kind.name().into(),
                    line,
                    reason: e.to_string(),
                };
                if opts.strict {
                    return Err(IngestError::StrictRow(err));
                }
                errors.push(err);
                continue;
            }
        }
        let line = record.position().map(|p| p.line()).unwrap_or(0);
        let values: Vec<String> = record
            .iter()
            .map(|v| String::from_utf8_lossy(v).into_owned())
            .collect();
        let parsed = if values.len() != header.len() {
            Err(format!(
                "expected {} fields, found {}",
                header.len(),
                values.len()
            ))
        } else {
            let fields = Fields {
                values: &values,
                positions: &positions,
                columns: kind.columns(),
            };
            R::from_fields(&fields).and_then(|row| match row.unique_key() {
                Some(key) if !seen_keys.insert(key.to_string()) => {
                    Err(format!("duplicate key `{key}`"))
                }
                _ => Ok(row),
            })
        };
        match parsed {
            Ok(row) => rows.push(row),
            Err(reason) => {
                let err = RowError {
                    table: kind.name().into(),
                    line,
                    reason,
                };
                if opts.strict {
                    return Err(IngestError::StrictRow(err));
                }
                errors.push(err);
            }
        }
    }
    Ok(Loaded { rows, errors })
}

/// Writes rows under the identity mapping (header = logical column names).
pub fn write_table<R: TableRow, W: Write>(out: W, rows: &[R]) -> Result<(), csv::Error> {
    write_table_mapped(out, rows, &ColumnMapping::identity())
}

/// Writes rows with headers taken from `mapping`. Columns the mapping does
/// not name keep their logical name.
pub fn write_table_mapped<R: TableRow, W: Write>(
    out: W,
    rows: &[R],
    mapping: &ColumnMapping,
) -> Result<(), csv::Error> {
    let mut w = csv::Writer::from_writer(out);
    let header: Vec<&str> = R::KIND
        .columns()
        .iter()
        .map(|c| mapping.physical(R::KIND, c).unwrap_or(c))
        .collect();
    w.write_record(&header)?;
    for row in rows {
        w.write_record(row.to_values())?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_table_file<R: TableRow>(path: &Path, rows: &[R]) -> Result<(), IngestError> {
    write_table_file_mapped(path, rows, &ColumnMapping::identity())
}

pub fn write_table_file_mapped<R: TableRow>(
    path: &Path,
    rows: &[R],
    mapping: &ColumnMapping,
) -> Result<(), IngestError> {
    let file = File::create(path).map_err(|source| IngestError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    write_table_mapped(std::io::BufWriter::new(file), rows, mapping).map_err(|e| IngestError::Csv {
        path: path.to_path_buf(),
        reason: e.to_string(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn load<R: TableRow>(text: &str, mapping: &ColumnMapping) -> Result<Loaded<R>, IngestError> {
        load_table_from_reader(text.as_bytes(), Path::new("mem.csv"), mapping, LoadOptions::default())
    }

    const ORG_HEADER: &str = "org_id,name,description,founded_on,created_at\n";

    #[test]
    fn header_only_file_is_empty() {
        let l: Loaded<OrganizationRow> = load(ORG_HEADER, &ColumnMapping::identity()).unwrap();
        assert!(l.rows.is_empty());
        assert!(l.errors.is_empty());
    }

    #[test]
    fn fixture_row_parses_dates() {
        let text = format!("{ORG_HEADER}c1,Acme,\"AI tools\",2020-06-11,2020-06-11\n");
        let l: Loaded<OrganizationRow> = load(&text, &ColumnMapping::identity()).unwrap();
        assert_eq!(l.rows.len(), 1);
        let r = &l.rows[0];
        assert_eq!(r.org_id, "c1");
        assert_eq!(r.description, "AI tools");
        assert_eq!(r.founded_on, NaiveDate::from_ymd_opt(2020, 6, 11));
    }

    #[test]
    fn malformed_date_is_a_row_error_naming_its_line() {
        let text = format!(
            "{ORG_HEADER}c1,Acme,,2020-06-11,\nc2,Beta,,2020-13-40,\nc3,Gamma,,,\n"
        );
        let l: Loaded<OrganizationRow> = load(&text, &ColumnMapping::identity()).unwrap();
        assert_eq!(l.rows.len(), 2);
        assert_eq!(l.errors.len(), 1);
        assert_eq!(l.errors[0].line, 3);
        assert!(l.errors[0].reason.contains("founded_on"));
    }

    #[test]
    fn strict_mode_promotes_row_errors() {
        let text = format!("{ORG_HEADER}c1,Acme,,bad,\n");
        let err = load_table_from_reader::<OrganizationRow, _>(
            text.as_bytes(),
            Path::new("mem.csv"),
            &ColumnMapping::identity(),
            LoadOptions { strict: true },
        )
        .unwrap_err();
        assert!(matches!(err, IngestError::StrictRow(RowError { line: 2, .. })));
    }

    #[test]
    fn missing_mapped_column_is_fatal() {
        let err = load::<OrganizationRow>("org_id,name\nc1,A\n", &ColumnMapping::identity())
            .unwrap_err();
        assert!(matches!(err, IngestError::MissingColumn { .. }));
    }

    #[test]
    fn unmapped_optional_columns_are_absent() {
        let mut m = ColumnMapping::identity();
        m.remove(TableKind::Organizations, "description");
        m.remove(TableKind::Organizations, "founded_on");
        m.remove(TableKind::Organizations, "created_at");
        let l: Loaded<OrganizationRow> = load("org_id,name\nc1,A\n", &m).unwrap();
        assert_eq!(l.rows[0].description, "");
        assert_eq!(l.rows[0].founded_on, None);
    }

    #[test]
    fn unmapped_required_column_is_fatal() {
        let mut m = ColumnMapping::identity();
        m.remove(TableKind::Organizations, "org_id");
        let err = load::<OrganizationRow>(ORG_HEADER, &m).unwrap_err();
        assert!(matches!(err, IngestError::UnmappedColumn { .. }));
    }

    #[test]
    fn default_mapping_reads_crunchbase_headers() {
        let text = "uuid,name,short_description,founded_on,created_at,extra\n\
                    c1,Acme,Tools,2019-01-02,2019-02-03T10:00:00Z,zzz\n";
        let l: Loaded<OrganizationRow> = load(text, &ColumnMapping::crunchbase_default()).unwrap();
        assert_eq!(l.rows[0].created_at, NaiveDate::from_ymd_opt(2019, 2, 3));
    }

    #[test]
    fn duplicate_keys_and_self_acquisitions_are_rejected() {
        let l: Loaded<OrganizationRow> =
            load(&format!("{ORG_HEADER}c1,A,,,\nc1,B,,,\n"), &ColumnMapping::identity()).unwrap();
        assert_eq!((l.rows.len(), l.errors.len()), (1, 1));

        let l: Loaded<AcquisitionRow> = load(
            "acquiree_id,acquirer_id,announced_on\na,a,\na,b,\n",
            &ColumnMapping::identity(),
        )
        .unwrap();
        assert_eq!((l.rows.len(), l.errors.len()), (1, 1));
    }

    #[test]
    fn negative_or_garbage_amounts_are_row_errors() {
        let l: Loaded<FundingRoundRow> = load(
            "round_id,org_id,announced_on,raised_usd\nr1,c1,,-5\nr2,c1,,abc\nr3,c1,,\nr4,c1,,12.5\n",
            &ColumnMapping::identity(),
        )
        .unwrap();
        assert_eq!(l.rows.len(), 2);
        assert_eq!(l.rows[0].raised_usd, None);
        assert_eq!(l.rows[1].raised_usd, Some(12.5));
        assert_eq!(l.errors.iter().map(|e| e.line).collect::<Vec<_>>(), vec![2, 3]);
    }

    #[test]
    fn wrong_field_count_and_invalid_utf8() {
        let mut bytes = b"org_id,name,description,founded_on,created_at\nc1,A\nc2,B,".to_vec();
        bytes.extend_from_slice(&[0xff, b'x']);
        bytes.extend_from_slice(b",,\n");
        let l: Loaded<OrganizationRow> = load_table_from_reader(
            bytes.as_slice(),
            Path::new("mem.csv"),
            &ColumnMapping::identity(),
            LoadOptions::default(),
        )
        .unwrap();
        assert_eq!(l.errors.len(), 1);
        assert_eq!(l.rows[0].description, "\u{fffd}x");
    }

    #[test]
    fn timestamps_truncate_and_junk_fails() {
        assert_eq!(
            parse_date("2020-06-11 12:00:00").unwrap(),
            NaiveDate::from_ymd_opt(2020, 6, 11)
        );
        assert!(parse_date("2020-6-11").is_err());
        assert!(parse_date("2020-06-11x").is_err());
        assert_eq!(parse_date("  ").unwrap(), None);
    }
}
