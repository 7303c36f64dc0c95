//! Batch evaluation of compiled prompts against a chat endpoint.

use std::io::{BufRead, Write};
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::mpsc;
use std::time::Instant;

use serde::{Deserialize, Serialize};

use super::client::ChatClient;
use super::parse::{parse_response, ParseStatus, ParsedResponse};
use super::transport::AttemptRecord;
use super::LlmError;
use crate::metrics::{classification_report, ClassificationReport};
use crate::prompt::{ChatMessage, Role, SftRecord};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalOutcome {
    pub org_id: String,
    pub label: u8,
    pub parsed: ParsedResponse,
    pub correct: u8,
    pub latency_ms: u64,
    pub request: Vec<ChatMessage>,
    /// Reference justification for offline BERTScore.
    pub reference: String,
    pub attempts: Vec<AttemptRecord>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

impl EvalOutcome {
    /// Prediction used for scoring; unparseable outcomes count as wrong.
    pub fn scored_prediction(&self) -> u8 {
        self.parsed.label.unwrap_or(1 - self.label)
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct StatusCounts {
    pub parsed: usize,
    pub fallback_parsed: usize,
    pub unparseable: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EvalRun {
    pub outcomes: Vec<EvalOutcome>,
    pub report: ClassificationReport,
    /// Unparseable outcomes, including those caused by transport errors.
    pub parse_failures: usize,
    pub transport_errors: usize,
    pub status_counts: StatusCounts,
}

/// The request for a record: its messages without a trailing assistant
/// target.
pub fn request_messages(record: &SftRecord) -> Vec<ChatMessage> {
    let mut m = record.chat.messages.clone();
    if m.last().is_some_and(|m| m.role == Role::Assistant) {
        m.pop();
    }
    m
}

fn evaluate_one(client: &ChatClient, record: &SftRecord) -> EvalOutcome {
    let request = request_messages(record);
    let start = Instant::now();
    let result = client.chat_complete(&request);
    let latency_ms = start.elapsed().as_millis() as u64;
    let (parsed, attempts, error) = match result {
        Ok(c) => (parse_response(&c.text), c.attempts, None),
        Err(e) => {
            let attempts = e.attempts().to_vec();
            (ParsedResponse::unparseable(""), attempts, Some(e.to_string()))
        }
    };
    let correct = u8::from(parsed.label == Some(record.target_label));
    EvalOutcome {
        org_id: record.chat.meta.org_id.clone(),
        label: record.target_label,
        parsed,
        correct,
        latency_ms,
        request,
        reference: record.target_justification.clone(),
        attempts,
        error,
    }
}

pub fn summarize(outcomes: Vec<EvalOutcome>) -> Result<EvalRun, LlmError> {
    let preds: Vec<u8> = outcomes.iter().map(EvalOutcome::scored_prediction).collect();
    let labels: Vec<u8> = outcomes.iter().map(|o| o.label).collect();
    let report = classification_report(&preds, &labels).map_err(|e| LlmError::Config(e.to_string()))?;
    let mut counts = StatusCounts::default();
    for o in &outcomes {
        match o.parsed.parse_status {
            ParseStatus::Parsed => counts.parsed += 1,
            ParseStatus::FallbackParsed => counts.fallback_parsed += 1,
            ParseStatus::Unparseable => counts.unparseable += 1,
        }
    }
    Ok(EvalRun {
        transport_errors: outcomes.iter().filter(|o| o.error.is_some()).count(),
        parse_failures: counts.unparseable,
        status_counts: counts,
        report,
        outcomes,
    })
}

/// Sends every record through `client` with at most `max_in_flight`
/// requests outstanding. Outcomes come back in input order. Per-record
/// failures are recorded in the outcome and never abort the run.
pub fn run_eval(client: &ChatClient, records: &[SftRecord], max_in_flight: usize) -> Result<EvalRun, LlmError> {
    if max_in_flight < 1 {
        return Err(LlmError::Config("max_in_flight must be at least 1".into()));
    }
    if records.is_empty() {
        return Err(LlmError::Config("no records to evaluate".into()));
    }
    let next = AtomicUsize::new(0);
    let (tx, rx) = mpsc::channel::<(usize, EvalOutcome)>();
    let mut slots: Vec<Option<EvalOutcome>> = vec![None; records.len()];
    std::thread::scope(|s| {
        for _ in 0..max_in_flight.min(records.len()) {
            let tx = tx.clone();
            let next = &next;
            s.spawn(move || loop {
                let i = next.fetch_add(1, Ordering::SeqCst);
                if i >= records.len() {
                    break;
                }
                if tx.send((i, evaluate_one(client, &records[i]))).is_err() {
                    break;
                }
            });
        }
        drop(tx);
        for (i, outcome) in rx {
            slots[i] = Some(outcome);
        }
    });
    let outcomes = slots
        .into_iter()
        .map(|o| o.expect("every record produces an outcome"))
        .collect();
    summarize(outcomes)
}

/// Audit line: everything needed to re-score offline.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AuditLine {
    pub org_id: String,
    pub request: Vec<ChatMessage>,
    pub raw: String,
    pub parsed: ParsedAudit,
    pub latency_ms: u64,
    pub label: u8,
    pub reference: String,
    pub attempts: Vec<AttemptRecord>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParsedAudit {
    pub label: Option<u8>,
    pub justification: Option<String>,
    pub parse_status: ParseStatus,
}

impl From<&EvalOutcome> for AuditLine {
    fn from(o: &EvalOutcome) -> Self {
        AuditLine {
            org_id: o.org_id.clone(),
            request: o.request.clone(),
            raw: o.parsed.raw.clone(),
            parsed: ParsedAudit {
                label: o.parsed.label,
                justification: o.parsed.justification.clone(),
                parse_status: o.parsed.parse_status,
            },
            latency_ms: o.latency_ms,
            label: o.label,
            reference: o.reference.clone(),
            attempts: o.attempts.clone(),
            error: o.error.clone(),
        }
    }
}

pub fn write_audit<W: Write>(mut out: W, outcomes: &[EvalOutcome]) -> std::io::Result<()> {
    for o in outcomes {
        let line = serde_json::to_string(&AuditLine::from(o)).map_err(std::io::Error::other)?;
        writeln!(out, "{line}")?;
    }
    Ok(())
}

pub fn read_audit<R: BufRead>(input: R) -> Result<Vec<AuditLine>, LlmError> {
    let mut out = Vec::new();
    for (n, line) in input.lines().enumerate() {
        let line = line.map_err(|e| LlmError::Io(e.to_string()))?;
        if line.trim().is_empty() {
            continue;
        }
        out.push(
            serde_json::from_str(&line).map_err(|e| LlmError::Protocol(format!("audit line {}: {e}", n + 1)))?,
        );
    }
    Ok(out)
}

/// Re-parses the raw completions of an audit log and scores them again.
pub fn rescore(lines: &[AuditLine]) -> Result<EvalRun, LlmError> {
    let outcomes = lines
        .iter()
        .map(|l| {
            let parsed = if l.error.is_some() {
                ParsedResponse::unparseable(l.raw.clone())
            } else {
                parse_response(&l.raw)
            };
            EvalOutcome {
                org_id: l.org_id.clone(),
                label: l.label,
                correct: u8::from(parsed.label == Some(l.label)),
                parsed,
                latency_ms: l.latency_ms,
                request: l.request.clone(),
                reference: l.reference.clone(),
                attempts: l.attempts.clone(),
                error: l.error.clone(),
            }
        })
        .collect();
    summarize(outcomes)
}
