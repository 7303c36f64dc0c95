//! Chat records and their delimiter-framed serialization.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::PromptError;

pub const IM_START: &str = "<|im_start|>";
pub const IM_END: &str = "<|im_end|>";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Role {
    System,
    User,
    Assistant,
}

impl Role {
    pub fn as_str(self) -> &'static str {
        match self {
            Role::System => "system",
            Role::User => "user",
            Role::Assistant => "assistant",
        }
    }
}

impl fmt::Display for Role {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Role {
    type Err = PromptError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "system" => Ok(Role::System),
            "user" => Ok(Role::User),
            "assistant" => Ok(Role::Assistant),
            other => Err(PromptError::Parse(format!("unknown role `{other}`"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ChatMessage {
    pub role: Role,
    pub content: String,
}

impl ChatMessage {
    pub fn new(role: Role, content: impl Into<String>) -> Self {
        ChatMessage {
            role,
            content: content.into(),
        }
    }

    pub fn user(content: impl Into<String>) -> Self {
        Self::new(Role::User, content)
    }

    pub fn assistant(content: impl Into<String>) -> Self {
        Self::new(Role::Assistant, content)
    }
}

pub fn contains_marker(s: &str) -> bool {
    s.contains(IM_START) || s.contains(IM_END)
}

/// Removes delimiter markers, repeating until none can re-form.
pub fn strip_markers(s: &str) -> String {
    let mut out = s.to_string();
    while contains_marker(&out) {
        out = out.replace(IM_START, "").replace(IM_END, "");
    }
    out
}

/// Checks role alternation: an optional leading system turn, then
/// user/assistant strictly alternating starting with user.
pub fn validate_messages(messages: &[ChatMessage]) -> Result<(), PromptError> {
    let body = match messages.first() {
        Some(m) if m.role == Role::System => &messages[1..],
        _ => messages,
    };
    for (i, m) in body.iter().enumerate() {
        let expected = if i % 2 == 0 { Role::User } else { Role::Assistant };
        if m.role != expected {
            return Err(PromptError::Invalid(format!(
                "turn {i} has role {} where {expected} was expected",
                m.role
            )));
        }
    }
    if let Some(m) = messages.iter().find(|m| contains_marker(&m.content)) {
        return Err(PromptError::MarkerInContent(m.role));
    }
    Ok(())
}

/// Frames each message as `<|im_start|>{role}\n{content}<|im_end|>\n`.
pub fn serialize_chat(messages: &[ChatMessage]) -> Result<String, PromptError> {
    let mut out = String::new();
    for m in messages {
        if contains_marker(&m.content) {
            return Err(PromptError::MarkerInContent(m.role));
        }
        out.push_str(IM_START);
        out.push_str(m.role.as_str());
        out.push('\n');
        out.push_str(&m.content);
        out.push_str(IM_END);
        out.push('\n');
    }
    Ok(out)
}

/// Inverse of [`serialize_chat`].
pub fn parse_chat(text: &str) -> Result<Vec<ChatMessage>, PromptError> {
    let mut rest = text;
    let mut out = Vec::new();
    while !rest.is_empty() {
        rest = rest
            .strip_prefix(IM_START)
            .ok_or_else(|| PromptError::Parse("expected start marker".into()))?;
        let (role, after_role) = rest
            .split_once('\n')
            .ok_or_else(|| PromptError::Parse("role line not terminated".into()))?;
        let role: Role = role.parse()?;
        let (content, after) = after_role
            .split_once(IM_END)
            .ok_or_else(|| PromptError::Parse("missing end marker".into()))?;
        if content.contains(IM_START) {
            return Err(PromptError::Parse("nested start marker".into()));
        }
        rest = after
            .strip_prefix('\n')
            .ok_or_else(|| PromptError::Parse("end marker not followed by newline".into()))?;
        out.push(ChatMessage::new(role, content));
    }
    Ok(out)
}
