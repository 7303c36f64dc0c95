//! JSON-over-HTTP transport and the retry loop around it.

use std::time::Duration;

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::LlmError;

#[derive(Debug, Clone)]
pub struct HttpRequest {
    pub url: String,
    pub body: serde_json::Value,
    pub bearer: Option<String>,
    pub timeout: Duration,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct HttpResponse {
    pub status: u16,
    pub body: String,
}

/// Failure below the HTTP status level.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum CallError {
    Timeout,
    Connect(String),
}

pub trait Transport: Send + Sync {
    fn post(&self, request: &HttpRequest) -> Result<HttpResponse, CallError>;
}

/// Blocking reqwest transport.
#[derive(Debug, Clone)]
pub struct HttpTransport {
    client: reqwest::blocking::Client,
}

impl HttpTransport {
    pub fn new() -> Result<Self, LlmError> {
        let client = reqwest::blocking::Client::builder()
            .build()
            .map_err(|e| LlmError::Config(format!("http client: {e}")))?;
        Ok(HttpTransport { client })
    }
}

fn classify(e: reqwest::Error) -> CallError {
    if e.is_timeout() {
        CallError::Timeout
    } else {
        CallError::Connect(e.to_string())
    }
}

impl Transport for HttpTransport {
    fn post(&self, request: &HttpRequest) -> Result<HttpResponse, CallError> {
        let mut rb = self
            .client
            .post(&request.url)
            .timeout(request.timeout)
            .json(&request.body);
        if let Some(key) = &request.bearer {
            rb = rb.bearer_auth(key);
        }
        let resp = rb.send().map_err(classify)?;
        let status = resp.status().as_u16();
        let body = resp.text().map_err(classify)?;
        Ok(HttpResponse { status, body })
    }
}

/// One try of a request and what came of it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AttemptRecord {
    pub attempt: u32,
    /// HTTP status, `timeout`, or `connect: <reason>`.
    pub outcome: String,
    /// Sleep before the next try, if one followed.
    pub backoff_ms: Option<u64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RetryPolicy {
    pub max_retries: u32,
    pub base: Duration,
    pub factor: f64,
    pub max_delay: Duration,
}

impl Default for RetryPolicy {
    fn default() -> Self {
        RetryPolicy {
            max_retries: 3,
            base: Duration::from_secs(1),
            factor: 2.0,
            max_delay: Duration::from_secs(30),
        }
    }
}

impl RetryPolicy {
    /// Upper bound of the sleep after failed attempt `attempt` (0-based).
    pub fn ceiling(&self, attempt: u32) -> Duration {
        let secs = self.base.as_secs_f64() * self.factor.powi(attempt as i32);
        Duration::from_secs_f64(secs.min(self.max_delay.as_secs_f64()))
    }

    /// Full jitter: uniform in `[0, ceiling]`.
    pub fn delay<R: Rng>(&self, attempt: u32, rng: &mut R) -> Duration {
        let c = self.ceiling(attempt).as_secs_f64();
        if c == 0.0 {
            return Duration::ZERO;
        }
        Duration::from_secs_f64(rng.gen_range(0.0..=c))
    }
}

pub fn is_retryable_status(status: u16) -> bool {
    status == 429 || (500..600).contains(&status)
}

/// Sends `request`, retrying timeouts, connection failures, 429 and 5xx.
/// Returns the first 2xx response with the attempt log.
pub fn send_with_retry(
    transport: &dyn Transport,
    request: &HttpRequest,
    policy: &RetryPolicy,
) -> Result<(HttpResponse, Vec<AttemptRecord>), LlmError> {
    let mut log: Vec<AttemptRecord> = Vec::new();
    let mut rng = rand::thread_rng();
    for attempt in 0..=policy.max_retries {
        let (outcome, retryable) = match transport.post(request) {
            Ok(resp) if (200..300).contains(&resp.status) => {
                log.push(AttemptRecord {
                    attempt: attempt + 1,
                    outcome: resp.status.to_string(),
                    backoff_ms: None,
                });
                return Ok((resp, log));
            }
            Ok(resp) if !is_retryable_status(resp.status) => {
                log.push(AttemptRecord {
                    attempt: attempt + 1,
                    outcome: resp.status.to_string(),
                    backoff_ms: None,
                });
                return Err(LlmError::Http {
                    status: resp.status,
                    body: resp.body,
                    attempts: log,
                });
            }
            Ok(resp) => (resp.status.to_string(), true),
            Err(CallError::Timeout) => ("timeout".to_string(), true),
            Err(CallError::Connect(m)) => (format!("connect: {m}"), true),
        };
        debug_assert!(retryable);
        let backoff = (attempt < policy.max_retries).then(|| policy.delay(attempt, &mut rng));
        log.push(AttemptRecord {
            attempt: attempt + 1,
            outcome,
            backoff_ms: backoff.map(|d| d.as_millis() as u64),
        });
        if let Some(d) = backoff {
            std::thread::sleep(d);
        }
    }
    Err(LlmError::Transport {
        message: format!("gave up after {} attempts", log.len()),
        attempts: log,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::sync::Mutex;

    struct Scripted(Mutex<Vec<Result<HttpResponse, CallError>>>);

    impl Transport for Scripted {
        fn post(&self, _: &HttpRequest) -> Result<HttpResponse, CallError> {
            self.0.lock().unwrap().remove(0)
        }
    }

    fn status(s: u16) -> Result<HttpResponse, CallError> {
        Ok(HttpResponse { status: s, body: String::new() })
    }

    fn req() -> HttpRequest {
        HttpRequest {
            url: "http://unused".into(),
            body: serde_json::json!({}),
            bearer: None,
            timeout: Duration::from_secs(1),
        }
    }

    fn fast(max_retries: u32) -> RetryPolicy {
        RetryPolicy {
            max_retries,
            base: Duration::from_millis(1),
            ..Default::default()
        }
    }

    #[test]
    fn retries_then_succeeds() {
        let t = Scripted(Mutex::new(vec![status(503), Err(CallError::Timeout), status(200)]));
        let (resp, log) = send_with_retry(&t, &req(), &fast(3)).unwrap();
        assert_eq!(resp.status, 200);
        let outcomes: Vec<&str> = log.iter().map(|a| a.outcome.as_str()).collect();
        assert_eq!(outcomes, ["503", "timeout", "200"]);
        assert!(log[0].backoff_ms.is_some() && log[2].backoff_ms.is_none());
    }

    #[test]
    fn gives_up_after_max_retries() {
        let t = Scripted(Mutex::new(vec![status(500), status(500), status(500), status(200)]));
        match send_with_retry(&t, &req(), &fast(2)) {
            Err(LlmError::Transport { attempts, .. }) => {
                assert_eq!(attempts.len(), 3);
                assert!(attempts[2].backoff_ms.is_none());
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn client_errors_are_not_retried() {
        let t = Scripted(Mutex::new(vec![status(400), status(200)]));
        match send_with_retry(&t, &req(), &fast(3)) {
            Err(LlmError::Http { status: 400, attempts, .. }) => assert_eq!(attempts.len(), 1),
            other => panic!("{other:?}"),
        }
        let t = Scripted(Mutex::new(vec![status(429), status(200)]));
        assert!(send_with_retry(&t, &req(), &fast(3)).is_ok());
    }

    #[test]
    fn backoff_ceiling_grows_and_caps() {
        let p = RetryPolicy::default();
        assert_eq!(p.ceiling(0), Duration::from_secs(1));
        assert_eq!(p.ceiling(2), Duration::from_secs(4));
        assert_eq!(p.ceiling(10), Duration::from_secs(30));
        let mut rng = rand::thread_rng();
        for a in 0..5 {
            assert!(p.delay(a, &mut rng) <= p.ceiling(a));
        }
    }
}
