//! Mapping free-text completions to a label and justification.

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ParseStatus {
    Parsed,
    FallbackParsed,
    Unparseable,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ParsedResponse {
    pub label: Option<u8>,
    pub justification: Option<String>,
    pub raw: String,
    pub parse_status: ParseStatus,
}

impl ParsedResponse {
    pub fn unparseable(raw: impl Into<String>) -> Self {
        ParsedResponse {
            label: None,
            justification: None,
            raw: raw.into(),
            parse_status: ParseStatus::Unparseable,
        }
    }
}

const PREDICTION_KEY: &str = "prediction:";
const JUSTIFICATION_KEY: &str = "justification:";

fn label_word(word: &str) -> Option<u8> {
    match word.to_ascii_lowercase().as_str() {
        "successful" | "yes" | "1" => Some(1),
        "unsuccessful" | "no" | "0" => Some(0),
        _ => None,
    }
}

/// Case-insensitive find that returns a byte offset into `hay` itself.
fn find_ci(hay: &str, needle: &str) -> Option<usize> {
    let n = needle.len();
    hay.char_indices()
        .map(|(i, _)| i)
        .find(|&i| hay.get(i..i + n).is_some_and(|s| s.eq_ignore_ascii_case(needle)))
}

/// First alphanumeric run in `s`, with its end offset.
fn first_word(s: &str) -> Option<(&str, usize)> {
    let start = s.find(|c: char| c.is_alphanumeric())?;
    let rest = &s[start..];
    let len = rest.find(|c: char| !c.is_alphanumeric()).unwrap_or(rest.len());
    Some((&rest[..len], start + len))
}

fn primary(raw: &str) -> Option<(u8, Option<String>)> {
    let at = find_ci(raw, PREDICTION_KEY)? + PREDICTION_KEY.len();
    let (word, end) = first_word(&raw[at..])?;
    let label = label_word(word)?;
    let after = &raw[at + end..];
    let justification = find_ci(after, JUSTIFICATION_KEY)
        .map(|j| after[j + JUSTIFICATION_KEY.len()..].trim().to_string())
        .filter(|s| !s.is_empty());
    Some((label, justification))
}

fn fallback(raw: &str) -> Option<u8> {
    raw.split(|c: char| !c.is_alphanumeric())
        .find_map(|w| match w.to_ascii_lowercase().as_str() {
            "successful" => Some(1),
            "unsuccessful" => Some(0),
            _ => None,
        })
}

/// Primary grammar: `prediction:` then a label word (`successful` /
/// `unsuccessful`, `yes` / `no`, `1` / `0`), optionally followed by
/// `justification:` and free text. Otherwise the first standalone
/// `successful` or `unsuccessful` anywhere in the text.
pub fn parse_response(raw: &str) -> ParsedResponse {
    if let Some((label, justification)) = primary(raw) {
        return ParsedResponse {
            label: Some(label),
            justification,
            raw: raw.to_string(),
            parse_status: ParseStatus::Parsed,
        };
    }
    match fallback(raw) {
        Some(label) => ParsedResponse {
            label: Some(label),
            justification: None,
            raw: raw.to_string(),
            parse_status: ParseStatus::FallbackParsed,
        },
        None => ParsedResponse::unparseable(raw),
    }
}
