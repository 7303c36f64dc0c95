//! JSONL dataset files.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::chat::ChatMessage;
use super::render::{ChatRecord, RecordMeta, SftRecord};
use super::template::PromptVariant;
use super::PromptError;

/// One line of a dataset file.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DatasetLine {
    pub messages: Vec<ChatMessage>,
    pub label: u8,
    pub justification: String,
    pub org_id: String,
    pub variant: PromptVariant,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub split: Option<String>,
}

impl From<&SftRecord> for DatasetLine {
    fn from(r: &SftRecord) -> Self {
        DatasetLine {
            messages: r.chat.messages.clone(),
            label: r.target_label,
            justification: r.target_justification.clone(),
            org_id: r.chat.meta.org_id.clone(),
            variant: r.chat.meta.variant,
            split: r.chat.meta.split.clone(),
        }
    }
}

impl From<DatasetLine> for SftRecord {
    fn from(l: DatasetLine) -> Self {
        SftRecord {
            chat: ChatRecord {
                messages: l.messages,
                meta: RecordMeta {
                    org_id: l.org_id,
                    variant: l.variant,
                    split: l.split,
                },
            },
            target_label: l.label,
            target_justification: l.justification,
        }
    }
}

pub fn write_jsonl<W: Write>(mut out: W, records: &[SftRecord]) -> std::io::Result<usize> {
    for r in records {
        serde_json::to_writer(&mut out, &DatasetLine::from(r))?;
        out.write_all(b"\n")?;
    }
    out.flush()?;
    Ok(records.len())
}

/// Writes one JSON object per record; returns the record count.
pub fn emit_jsonl(records: &[SftRecord], path: &Path) -> Result<usize, PromptError> {
    let io = |e: std::io::Error| PromptError::Io(format!("{}: {e}", path.display()));
    let file = File::create(path).map_err(io)?;
    write_jsonl(BufWriter::new(file), records).map_err(io)
}

pub fn read_jsonl<R: BufRead>(input: R) -> Result<Vec<SftRecord>, PromptError> {
    let mut out = Vec::new();
    for (i, line) in input.lines().enumerate() {
        let line = line.map_err(|e| PromptError::Io(e.to_string()))?;
        if line.trim().is_empty() {
            continue;
        }
        let parsed: DatasetLine = serde_json::from_str(&line)
            .map_err(|e| PromptError::Parse(format!("line {}: {e}", i + 1)))?;
        out.push(parsed.into());
    }
    Ok(out)
}

pub fn read_jsonl_file(path: &Path) -> Result<Vec<SftRecord>, PromptError> {
    let file = File::open(path).map_err(|e| PromptError::Io(format!("{}: {e}", path.display())))?;
    read_jsonl(BufReader::new(file))
}
