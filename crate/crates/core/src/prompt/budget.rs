//! Token-budget enforcement by trimming description text.

use super::chat::{serialize_chat, ChatMessage, Role};
use super::render::{ChatRecord, DESCRIPTION_PREFIX, TRUNCATION_MARK};
use super::PromptError;
use crate::tokens::TokenCounter;

pub const DEFAULT_MAX_TOKENS: usize = 256;

fn count(messages: &[ChatMessage], counter: &dyn TokenCounter) -> Result<usize, PromptError> {
    Ok(counter.count(&serialize_chat(messages)?))
}

/// Byte offset where the description text of a user message starts.
fn description_start(content: &str) -> Option<usize> {
    content
        .rfind(DESCRIPTION_PREFIX)
        .map(|i| i + DESCRIPTION_PREFIX.len())
}

fn with_description(content: &str, start: usize, words: &[&str], truncated: bool) -> String {
    let mut s = content[..start].to_string();
    s.push_str(&words.join(" "));
    if truncated {
        if !words.is_empty() {
            s.push(' ');
        }
        s.push_str(TRUNCATION_MARK);
    }
    s
}

/// Shrinks the record until its serialization fits `max_tokens`.
///
/// Only description text is cut, whole words from the right, starting with
/// the last user turn and moving to earlier exemplar turns if needed. A cut
/// description ends with `…`. Records that already fit are returned as is.
pub fn enforce_budget(
    record: &ChatRecord,
    max_tokens: usize,
    counter: &dyn TokenCounter,
) -> Result<ChatRecord, PromptError> {
    let mut messages = record.messages.clone();
    let initial = count(&messages, counter)?;
    if initial <= max_tokens {
        return Ok(record.clone());
    }
    let user_turns: Vec<usize> = (0..messages.len())
        .rev()
        .filter(|&i| messages[i].role == Role::User)
        .collect();
    for i in user_turns {
        let content = messages[i].content.clone();
        let Some(start) = description_start(&content) else {
            continue;
        };
        let words: Vec<&str> = content[start..].split_whitespace().collect();
        if words.len() == 1 && words[0] == TRUNCATION_MARK {
            continue;
        }
        let fits = |k: usize, msgs: &mut Vec<ChatMessage>| -> Result<bool, PromptError> {
            msgs[i].content = with_description(&content, start, &words[..k], true);
            Ok(count(msgs, counter)? <= max_tokens)
        };
        // Largest k in [0, len) whose truncated form fits; fits() is
        // monotone non-increasing in k.
        if fits(0, &mut messages)? {
            let (mut lo, mut hi) = (0usize, words.len());
            while hi - lo > 1 {
                let mid = (lo + hi) / 2;
                if fits(mid, &mut messages)? {
                    lo = mid;
                } else {
                    hi = mid;
                }
            }
            messages[i].content = with_description(&content, start, &words[..lo], true);
            return Ok(ChatRecord {
                messages,
                meta: record.meta.clone(),
            });
        }
        // Leave this turn minimal and keep cutting earlier turns.
    }
    Err(PromptError::OverBudget {
        tokens: count(&messages, counter)?,
        max_tokens,
    })
}
