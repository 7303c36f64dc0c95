//! Chat-completions client, response parsing and batch evaluation.

mod client;
mod eval;
mod parse;
mod transport;

use thiserror::Error;

pub use client::{extract_content, request_body, ChatClient, Completion, EndpointConfig, DEFAULT_API_KEY_ENV};
pub use eval::{
    read_audit, request_messages, rescore, run_eval, summarize, write_audit, AuditLine, EvalOutcome, EvalRun,
    ParsedAudit, StatusCounts,
};
pub use parse::{parse_response, ParseStatus, ParsedResponse};
pub use transport::{
    is_retryable_status, send_with_retry, AttemptRecord, CallError, HttpRequest, HttpResponse, HttpTransport,
    RetryPolicy, Transport,
};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum LlmError {
    #[error("transport: {message}")]
    Transport {
        message: String,
        attempts: Vec<AttemptRecord>,
    },
    #[error("http status {status}: {body}")]
    Http {
        status: u16,
        body: String,
        attempts: Vec<AttemptRecord>,
    },
    #[error("protocol: {0}")]
    Protocol(String),
    #[error("config: {0}")]
    Config(String),
    #[error("io: {0}")]
    Io(String),
}

impl LlmError {
    pub fn attempts(&self) -> &[AttemptRecord] {
        match self {
            LlmError::Transport { attempts, .. } | LlmError::Http { attempts, .. } => attempts,
            _ => &[],
        }
    }
}
