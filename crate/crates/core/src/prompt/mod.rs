//! Prompt compilation: chat-format records for inference and supervised
//! fine-tuning, token budgeting, few-shot subsets and dataset emission.

mod budget;
mod chat;
mod dataset;
mod fewshot;
mod manifest;
mod render;
mod template;

use thiserror::Error;

pub use budget::{enforce_budget, DEFAULT_MAX_TOKENS};
pub use chat::{
    contains_marker, parse_chat, serialize_chat, strip_markers, validate_messages, ChatMessage,
    Role, IM_END, IM_START,
};
pub use dataset::{emit_jsonl, read_jsonl, read_jsonl_file, write_jsonl, DatasetLine};
pub use fewshot::sample_fewshot;
pub use manifest::{emit_training_manifest, LoraConfig, TrainingManifest};
pub use render::{
    assistant_target, format_age, format_usd, label_keyword, render_profile_block,
    render_profile_inline, render_prompt, scrub_leaky_terms, template_justification, ChatRecord,
    RecordMeta, RenderMode, RenderOptions, SftRecord, DESCRIPTION_PREFIX, LEAKY_TERMS,
    NEGATIVE_KEYWORD, POSITIVE_KEYWORD, PROFILE_HEADER, TRUNCATION_MARK,
};
pub use template::{PromptTemplates, PromptVariant, PROFILE_PLACEHOLDER};

#[derive(Debug, Error, PartialEq, Eq)]
pub enum PromptError {
    #[error("unknown prompt variant `{0}`")]
    UnknownVariant(String),
    #[error("{0} message content contains a chat delimiter marker")]
    MarkerInContent(Role),
    #[error("invalid chat record: {0}")]
    Invalid(String),
    #[error("cannot parse chat text: {0}")]
    Parse(String),
    #[error("record needs {tokens} tokens even with empty descriptions; budget is {max_tokens}")]
    OverBudget { tokens: usize, max_tokens: usize },
    #[error("few-shot sampling: {0}")]
    FewShot(String),
    #[error("template: {0}")]
    Template(String),
    #[error("manifest: {0}")]
    Manifest(String),
    #[error("i/o: {0}")]
    Io(String),
}

use crate::features::CompanyProfile;
use crate::tokens::TokenCounter;

/// Everything needed to turn profiles into budgeted records.
#[derive(Debug, Clone)]
pub struct PromptSettings {
    pub variant: PromptVariant,
    pub mode: RenderMode,
    pub max_tokens: usize,
    pub options: RenderOptions,
    pub templates: PromptTemplates,
}

impl Default for PromptSettings {
    fn default() -> Self {
        PromptSettings {
            variant: PromptVariant::V4,
            mode: RenderMode::Sft,
            max_tokens: DEFAULT_MAX_TOKENS,
            options: RenderOptions::default(),
            templates: PromptTemplates::default(),
        }
    }
}

/// Renders and budgets one profile.
pub fn compile_record(
    profile: &CompanyProfile,
    exemplars: &[SftRecord],
    settings: &PromptSettings,
    counter: &dyn TokenCounter,
) -> Result<SftRecord, PromptError> {
    let mut rec = render_prompt(
        profile,
        settings.variant,
        settings.mode,
        exemplars,
        &settings.templates,
        &settings.options,
    )?;
    rec.chat = enforce_budget(&rec.chat, settings.max_tokens, counter)?;
    Ok(rec)
}

/// Renders and budgets a batch, preserving order.
pub fn compile_records(
    profiles: &[CompanyProfile],
    settings: &PromptSettings,
    counter: &dyn TokenCounter,
) -> Result<Vec<SftRecord>, PromptError> {
    profiles
        .iter()
        .map(|p| compile_record(p, &[], settings, counter))
        .collect()
}
