//! Profile export and re-import (CSV and JSONL).

use std::io::{BufRead, Write};

use super::profile::CompanyProfile;

pub fn write_profiles_csv<W: Write>(out: W, profiles: &[CompanyProfile]) -> Result<(), csv::Error> {
    let mut w = csv::Writer::from_writer(out);
    for p in profiles {
        w.serialize(p)?;
    }
    if profiles.is_empty() {
        // serde-driven headers are only emitted with the first record
        w.write_record([
            "org_id",
            "name",
            "description",
            "age_years",
            "age_source",
            "total_raised_usd",
            "raised_imputed",
            "num_funding_rounds",
            "num_investors",
            "num_acquisitions_made",
            "num_executives",
            "had_ipo",
            "was_acquired",
            "success",
        ])?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_profiles_jsonl<W: Write>(mut out: W, profiles: &[CompanyProfile]) -> std::io::Result<()> {
    for p in profiles {
        serde_json::to_writer(&mut out, p)?;
        out.write_all(b"\n")?;
    }
    out.flush()
}

pub fn read_profiles_jsonl<R: BufRead>(input: R) -> Result<Vec<CompanyProfile>, String> {
    let mut out = Vec::new();
    for (i, line) in input.lines().enumerate() {
        let line = line.map_err(|e| e.to_string())?;
        if line.trim().is_empty() {
            continue;
        }
        out.push(serde_json::from_str(&line).map_err(|e| format!("line {}: {e}", i + 1))?);
    }
    Ok(out)
}
