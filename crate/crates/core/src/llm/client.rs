//! OpenAI-compatible chat-completions client.

use std::sync::Arc;
use std::time::Duration;

use serde::{Deserialize, Serialize};

use super::transport::{send_with_retry, AttemptRecord, HttpRequest, HttpTransport, RetryPolicy, Transport};
use super::LlmError;
use crate::prompt::ChatMessage;

pub const DEFAULT_API_KEY_ENV: &str = "OPENAI_API_KEY";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EndpointConfig {
    pub base_url: String,
    pub model: String,
    /// Name of the environment variable holding the bearer key.
    pub api_key_env: String,
    pub temperature: f64,
    pub max_completion_tokens: u32,
    pub timeout_secs: u64,
    pub max_retries: u32,
    pub max_in_flight: usize,
    pub backoff_base_ms: u64,
}

impl Default for EndpointConfig {
    fn default() -> Self {
        EndpointConfig {
            base_url: "http://127.0.0.1:8000/v1".into(),
            model: "default".into(),
            api_key_env: DEFAULT_API_KEY_ENV.into(),
            temperature: 0.0,
            max_completion_tokens: 128,
            timeout_secs: 60,
            max_retries: 3,
            max_in_flight: 4,
            backoff_base_ms: 1000,
        }
    }
}

impl EndpointConfig {
    pub fn validate(&self) -> Result<(), LlmError> {
        if !(self.temperature >= 0.0 && self.temperature.is_finite()) {
            return Err(LlmError::Config("temperature must be >= 0".into()));
        }
        if self.max_in_flight < 1 {
            return Err(LlmError::Config("max_in_flight must be at least 1".into()));
        }
        if self.base_url.trim().is_empty() {
            return Err(LlmError::Config("base_url is empty".into()));
        }
        if self.timeout_secs == 0 {
            return Err(LlmError::Config("timeout must be positive".into()));
        }
        Ok(())
    }

    pub fn retry_policy(&self) -> RetryPolicy {
        RetryPolicy {
            max_retries: self.max_retries,
            base: Duration::from_millis(self.backoff_base_ms),
            ..RetryPolicy::default()
        }
    }

    pub fn completions_url(&self) -> String {
        format!("{}/chat/completions", self.base_url.trim_end_matches('/'))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Completion {
    pub text: String,
    pub attempts: Vec<AttemptRecord>,
}

#[derive(Serialize)]
struct WireMessage<'a> {
    role: &'a str,
    content: &'a str,
}

#[derive(Deserialize)]
struct WireResponse {
    choices: Vec<WireChoice>,
}

#[derive(Deserialize)]
struct WireChoice {
    message: WireContent,
}

#[derive(Deserialize)]
struct WireContent {
    content: Option<String>,
}

pub fn request_body(config: &EndpointConfig, messages: &[ChatMessage]) -> serde_json::Value {
    let wire: Vec<WireMessage> = messages
        .iter()
        .map(|m| WireMessage {
            role: m.role.as_str(),
            content: &m.content,
        })
        .collect();
    serde_json::json!({
        "model": config.model,
        "messages": wire,
        "temperature": config.temperature,
        "max_tokens": config.max_completion_tokens,
    })
}

/// Content of the first choice in a chat-completions response body.
pub fn extract_content(body: &str) -> Result<String, LlmError> {
    let resp: WireResponse =
        serde_json::from_str(body).map_err(|e| LlmError::Protocol(format!("response body: {e}")))?;
    resp.choices
        .into_iter()
        .next()
        .ok_or_else(|| LlmError::Protocol("response has no choices".into()))?
        .message
        .content
        .ok_or_else(|| LlmError::Protocol("first choice has no content".into()))
}

#[derive(Clone)]
pub struct ChatClient {
    config: EndpointConfig,
    transport: Arc<dyn Transport>,
    api_key: Option<String>,
}

impl ChatClient {
    /// HTTP client; the key is read from the configured environment variable.
    pub fn new(config: EndpointConfig) -> Result<Self, LlmError> {
        let api_key = std::env::var(&config.api_key_env).ok().filter(|k| !k.is_empty());
        Self::with_transport(config, Arc::new(HttpTransport::new()?), api_key)
    }

    pub fn with_transport(
        config: EndpointConfig,
        transport: Arc<dyn Transport>,
        api_key: Option<String>,
    ) -> Result<Self, LlmError> {
        config.validate()?;
        Ok(ChatClient {
            config,
            transport,
            api_key,
        })
    }

    pub fn config(&self) -> &EndpointConfig {
        &self.config
    }

    pub fn chat_complete(&self, messages: &[ChatMessage]) -> Result<Completion, LlmError> {
        if messages.is_empty() {
            return Err(LlmError::Config("no messages to send".into()));
        }
        let request = HttpRequest {
            url: self.config.completions_url(),
            body: request_body(&self.config, messages),
            bearer: self.api_key.clone(),
            timeout: Duration::from_secs(self.config.timeout_secs),
        };
        let (resp, attempts) = send_with_retry(self.transport.as_ref(), &request, &self.config.retry_policy())?;
        Ok(Completion {
            text: extract_content(&resp.body)?,
            attempts,
        })
    }
}
