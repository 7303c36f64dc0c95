//! Profile text, templated justifications and full prompt records.

use serde::{Deserialize, Serialize};

use super::chat::{strip_markers, ChatMessage, Role};
use super::template::{PromptTemplates, PromptVariant};
use super::PromptError;
use crate::features::{CompanyProfile, Labeled};

pub const PROFILE_HEADER: &str = "Company profile:";
/// Prefix of the description line; the description is always the last line
/// of a user prompt so the budget can trim it in place.
pub const DESCRIPTION_PREFIX: &str = "\nDescription: ";
pub const TRUNCATION_MARK: &str = "…";

pub const POSITIVE_KEYWORD: &str = "Successful";
pub const NEGATIVE_KEYWORD: &str = "Unsuccessful";

/// Substrings that reveal the label and are scrubbed from free text when the
/// leakage guard is on.
pub const LEAKY_TERMS: [&str; 3] = ["acquisition", "acquired", "ipo"];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct RenderOptions {
    pub include_description: bool,
    pub leakage_guard: bool,
}

impl Default for RenderOptions {
    fn default() -> Self {
        RenderOptions {
            include_description: true,
            leakage_guard: true,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum RenderMode {
    /// User turn only; the model is expected to answer.
    Inference,
    /// User turn plus the supervised assistant target.
    Sft,
}

/// Removes every case-insensitive occurrence of the leaky terms, repeating
/// until none re-forms from the remaining characters.
pub fn scrub_leaky_terms(text: &str) -> String {
    let mut chars: Vec<char> = text.chars().collect();
    let longest = LEAKY_TERMS.iter().map(|t| t.len()).max().unwrap_or(0);
    let mut start = 0;
    while start < chars.len() {
        let hit = LEAKY_TERMS.iter().find(|term| {
            let n = term.len();
            start + n <= chars.len()
                && chars[start..start + n]
                    .iter()
                    .zip(term.chars())
                    .all(|(c, t)| c.to_lowercase().eq(std::iter::once(t)))
        });
        match hit {
            Some(term) => {
                chars.drain(start..start + term.len());
                // a removal can splice a new match together just before `start`
                start = start.saturating_sub(longest);
            }
            None => start += 1,
        }
    }
    chars.into_iter().collect()
}

/// Single-line, marker-free, optionally scrubbed version of free text.
fn clean_text(text: &str, opts: &RenderOptions) -> String {
    let mut s = strip_markers(&text.split_whitespace().collect::<Vec<_>>().join(" "));
    if opts.leakage_guard {
        s = scrub_leaky_terms(&s);
        s = s.split_whitespace().collect::<Vec<_>>().join(" ");
    }
    s
}

pub fn format_age(profile: &CompanyProfile) -> String {
    if profile.age_known() {
        format!("{:.1} years", profile.age_years)
    } else {
        "unknown".to_string()
    }
}

pub fn format_usd(amount: f64) -> String {
    format!("{amount:.0}")
}

fn fields(profile: &CompanyProfile, opts: &RenderOptions) -> Vec<(&'static str, String)> {
    vec![
        ("Name", clean_text(&profile.name, opts)),
        ("Age", format_age(profile)),
        ("Total raised USD", format_usd(profile.total_raised_usd)),
        ("Funding rounds", profile.num_funding_rounds.to_string()),
        ("Distinct investors", profile.num_investors.to_string()),
        ("Companies bought", profile.num_acquisitions_made.to_string()),
        ("Executives", profile.num_executives.to_string()),
    ]
}

fn push_description(out: &mut String, profile: &CompanyProfile, opts: &RenderOptions) {
    if opts.include_description {
        out.push_str(DESCRIPTION_PREFIX);
        out.push_str(&clean_text(&profile.description, opts));
    }
}

/// The structured `Field: value` block used by V3 and V4.
pub fn render_profile_block(profile: &CompanyProfile, opts: &RenderOptions) -> String {
    let mut out = String::from(PROFILE_HEADER);
    for (k, v) in fields(profile, opts) {
        out.push('\n');
        out.push_str(k);
        out.push_str(": ");
        out.push_str(&v);
    }
    push_description(&mut out, profile, opts);
    out
}

/// The run-on sentence form used by V1 and V2.
pub fn render_profile_inline(profile: &CompanyProfile, opts: &RenderOptions) -> String {
    let mut out = fields(profile, opts)
        .into_iter()
        .map(|(k, v)| format!("{k}: {v}."))
        .collect::<Vec<_>>()
        .join(" ");
    push_description(&mut out, profile, opts);
    out
}

pub fn label_keyword(label: u8) -> &'static str {
    if label == 1 {
        POSITIVE_KEYWORD
    } else {
        NEGATIVE_KEYWORD
    }
}

/// Funding tier thresholds in USD.
pub const STRONG_FUNDING_USD: f64 = 10_000_000.0;
pub const MODERATE_FUNDING_USD: f64 = 1_000_000.0;
/// Investor and executive tier thresholds (counts).
pub const BROAD_INVESTORS: u32 = 5;
pub const LARGE_EXECUTIVE_TEAM: u32 = 5;

fn funding_phrase(usd: f64) -> &'static str {
    if usd >= STRONG_FUNDING_USD {
        "strong funding"
    } else if usd >= MODERATE_FUNDING_USD {
        "moderate funding"
    } else if usd > 0.0 {
        "limited funding"
    } else {
        "an absence of recorded funding"
    }
}

fn investor_phrase(n: u32) -> &'static str {
    match n {
        0 => "no recorded investors",
        1 => "a single investor",
        n if n < BROAD_INVESTORS => "several investors",
        _ => "a broad investor base",
    }
}

fn executive_phrase(n: u32) -> &'static str {
    match n {
        0 => "a minimal team with no recorded executives",
        1 => "a single executive",
        n if n < LARGE_EXECUTIVE_TEAM => "a small executive team",
        _ => "a large executive team",
    }
}

/// Label-aligned heuristic sentence. Depends only on the label and the
/// funding/investor/executive tiers, so it never quotes a number.
pub fn template_justification(profile: &CompanyProfile) -> String {
    let outcome = if profile.success == 1 {
        "which supports a successful outcome"
    } else {
        "which points to an unsuccessful outcome"
    };
    format!(
        "The company shows {}, {} and {}, {outcome}.",
        funding_phrase(profile.total_raised_usd),
        investor_phrase(profile.num_investors),
        executive_phrase(profile.num_executives),
    )
}

pub fn assistant_target(label: u8, justification: &str) -> String {
    format!("Prediction: {}\nJustification: {justification}", label_keyword(label))
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RecordMeta {
    pub org_id: String,
    pub variant: PromptVariant,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub split: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ChatRecord {
    pub messages: Vec<ChatMessage>,
    pub meta: RecordMeta,
}

/// A chat record with its supervised targets. In inference mode the
/// assistant turn is absent and the targets act as evaluation references.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SftRecord {
    pub chat: ChatRecord,
    pub target_label: u8,
    pub target_justification: String,
}

impl SftRecord {
    pub fn has_assistant_target(&self) -> bool {
        self.chat
            .messages
            .last()
            .is_some_and(|m| m.role == Role::Assistant)
    }
}

impl Labeled for SftRecord {
    fn label(&self) -> u8 {
        self.target_label
    }
}

/// Builds the prompt record for one profile. Exemplars, when given, are
/// prepended as completed user/assistant turns.
pub fn render_prompt(
    profile: &CompanyProfile,
    variant: PromptVariant,
    mode: RenderMode,
    exemplars: &[SftRecord],
    templates: &PromptTemplates,
    opts: &RenderOptions,
) -> Result<SftRecord, PromptError> {
    let mut messages = Vec::new();
    for ex in exemplars {
        if !ex.has_assistant_target() {
            return Err(PromptError::Invalid(format!(
                "exemplar {} lacks an assistant turn",
                ex.chat.meta.org_id
            )));
        }
        messages.extend(ex.chat.messages.iter().filter(|m| m.role != Role::System).cloned());
    }
    let body = if variant.structured_profile() {
        render_profile_block(profile, opts)
    } else {
        render_profile_inline(profile, opts)
    };
    messages.push(ChatMessage::user(templates.fill(variant, &body)));

    let justification = template_justification(profile);
    if mode == RenderMode::Sft {
        messages.push(ChatMessage::assistant(assistant_target(profile.success, &justification)));
    }
    super::chat::validate_messages(&messages)?;
    Ok(SftRecord {
        chat: ChatRecord {
            messages,
            meta: RecordMeta {
                org_id: profile.org_id.clone(),
                variant,
                split: None,
            },
        },
        target_label: profile.success,
        target_justification: justification,
    })
}
