//! Token counting used for description statistics and the prompt budget.
//!
//! Real model tokenizers are out of reach here, so the default counter is a
//! deterministic approximation: every maximal run of word characters
//! (alphanumeric or `_`) is one token, and every other non-whitespace
//! character is a token of its own. Callers with access to a model
//! tokenizer plug it in through [`FnCounter`].

use std::fmt;

pub trait TokenCounter: Send + Sync {
    fn count(&self, text: &str) -> usize;
}

/// Whitespace-and-punctuation segmentation.
#[derive(Debug, Clone, Copy, Default)]
pub struct DefaultCounter;

fn is_word_char(c: char) -> bool {
    c.is_alphanumeric() || c == '_'
}

impl TokenCounter for DefaultCounter {
    fn count(&self, text: &str) -> usize {
        let mut n = 0;
        let mut in_word = false;
        for c in text.chars() {
            if is_word_char(c) {
                if !in_word {
                    n += 1;
                    in_word = true;
                }
            } else {
                in_word = false;
                if !c.is_whitespace() {
                    n += 1;
                }
            }
        }
        n
    }
}

/// Adapts any closure (for example a binding to an external tokenizer).
pub struct FnCounter<F>(pub F);

impl<F> TokenCounter for FnCounter<F>
where
    F: Fn(&str) -> usize + Send + Sync,
{
    fn count(&self, text: &str) -> usize {
        (self.0)(text)
    }
}

impl<F> fmt::Debug for FnCounter<F> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str("FnCounter")
    }
}
