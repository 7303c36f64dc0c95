//! Sources of per-token embeddings.

use std::collections::HashMap;
use std::io::BufRead;
use std::path::Path;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::{Arc, Mutex};
use std::time::Duration;

use serde::Deserialize;
use sha2::{Digest, Sha256};

use super::{MetricsError, TokenEmbeddings};
use crate::llm::{send_with_retry, HttpRequest, HttpTransport, RetryPolicy, Transport};

pub trait EmbeddingProvider: Send + Sync {
    fn embed(&self, text: &str) -> Result<TokenEmbeddings, MetricsError>;
}

fn non_empty(text: &str) -> Result<(), MetricsError> {
    if text.trim().is_empty() {
        Err(MetricsError::Empty)
    } else {
        Ok(())
    }
}

#[derive(Deserialize)]
struct WireEmbeddings {
    tokens: Vec<String>,
    vectors: Vec<Vec<f64>>,
}

#[derive(Deserialize)]
struct FixtureLine {
    text: String,
    tokens: Vec<String>,
    vectors: Vec<Vec<f64>>,
}

/// Embeddings read from a JSONL file of `{text, tokens, vectors}` lines.
#[derive(Debug, Clone, Default)]
pub struct FixtureProvider {
    entries: HashMap<String, TokenEmbeddings>,
}

impl FixtureProvider {
    pub fn from_reader<R: BufRead>(input: R) -> Result<Self, MetricsError> {
        let mut entries = HashMap::new();
        for (n, line) in input.lines().enumerate() {
            let line = line.map_err(|e| MetricsError::Provider(e.to_string()))?;
            if line.trim().is_empty() {
                continue;
            }
            let f: FixtureLine = serde_json::from_str(&line)
                .map_err(|e| MetricsError::Provider(format!("fixture line {}: {e}", n + 1)))?;
            entries.insert(f.text, TokenEmbeddings::new(f.tokens, f.vectors)?);
        }
        Ok(FixtureProvider { entries })
    }

    pub fn from_file(path: &Path) -> Result<Self, MetricsError> {
        let f = std::fs::File::open(path).map_err(|e| MetricsError::Provider(format!("{}: {e}", path.display())))?;
        Self::from_reader(std::io::BufReader::new(f))
    }

    pub fn insert(&mut self, text: impl Into<String>, emb: TokenEmbeddings) {
        self.entries.insert(text.into(), emb);
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }
}

impl EmbeddingProvider for FixtureProvider {
    fn embed(&self, text: &str) -> Result<TokenEmbeddings, MetricsError> {
        non_empty(text)?;
        self.entries
            .get(text)
            .cloned()
            .ok_or_else(|| MetricsError::Provider(format!("no fixture embeddings for {text:?}")))
    }
}

/// POSTs `{"text": ...}` and expects `{"tokens": [...], "vectors": [[...]]}`.
pub struct HttpEmbeddingProvider {
    url: String,
    transport: Arc<dyn Transport>,
    policy: RetryPolicy,
    timeout: Duration,
}

impl HttpEmbeddingProvider {
    pub fn new(url: impl Into<String>, policy: RetryPolicy, timeout: Duration) -> Result<Self, MetricsError> {
        let transport = HttpTransport::new().map_err(|e| MetricsError::Provider(e.to_string()))?;
        Ok(Self::with_transport(url, Arc::new(transport), policy, timeout))
    }

    pub fn with_transport(
        url: impl Into<String>,
        transport: Arc<dyn Transport>,
        policy: RetryPolicy,
        timeout: Duration,
    ) -> Self {
        HttpEmbeddingProvider {
            url: url.into(),
            transport,
            policy,
            timeout,
        }
    }
}

impl EmbeddingProvider for HttpEmbeddingProvider {
    fn embed(&self, text: &str) -> Result<TokenEmbeddings, MetricsError> {
        non_empty(text)?;
        let req = HttpRequest {
            url: self.url.clone(),
            body: serde_json::json!({ "text": text }),
            bearer: None,
            timeout: self.timeout,
        };
        let (resp, _) = send_with_retry(self.transport.as_ref(), &req, &self.policy)
            .map_err(|e| MetricsError::Provider(e.to_string()))?;
        let w: WireEmbeddings =
            serde_json::from_str(&resp.body).map_err(|e| MetricsError::Provider(format!("response body: {e}")))?;
        TokenEmbeddings::new(w.tokens, w.vectors)
    }
}

/// Memoizes another provider by SHA-256 of the text.
pub struct CachingProvider<P> {
    inner: P,
    cache: Mutex<HashMap<[u8; 32], TokenEmbeddings>>,
    misses: AtomicUsize,
}

impl<P: EmbeddingProvider> CachingProvider<P> {
    pub fn new(inner: P) -> Self {
        CachingProvider {
            inner,
            cache: Mutex::new(HashMap::new()),
            misses: AtomicUsize::new(0),
        }
    }

    /// Calls that reached the inner provider.
    pub fn misses(&self) -> usize {
        self.misses.load(Ordering::SeqCst)
    }
}

impl<P: EmbeddingProvider> EmbeddingProvider for CachingProvider<P> {
    fn embed(&self, text: &str) -> Result<TokenEmbeddings, MetricsError> {
        non_empty(text)?;
        let key: [u8; 32] = Sha256::digest(text.as_bytes()).into();
        if let Some(hit) = self.cache.lock().expect("cache lock").get(&key) {
            return Ok(hit.clone());
        }
        self.misses.fetch_add(1, Ordering::SeqCst);
        let emb = self.inner.embed(text)?;
        self.cache.lock().expect("cache lock").insert(key, emb.clone());
        Ok(emb)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::llm::{CallError, HttpResponse};

    const FIXTURE: &str = r#"{"text": "strong funding", "tokens": ["strong", "funding"], "vectors": [[1.0, 0.0], [0.5, 0.5]]}
{"text": "few investors", "tokens": ["few", "investors"], "vectors": [[0.0, 1.0], [0.2, 0.9]]}
"#;

    #[test]
    fn fixture_passthrough() {
        let p = FixtureProvider::from_reader(FIXTURE.as_bytes()).unwrap();
        assert_eq!(p.len(), 2);
        let e = p.embed("strong funding").unwrap();
        assert_eq!(e.tokens, ["strong", "funding"]);
        assert_eq!(e.vectors, vec![vec![1.0, 0.0], vec![0.5, 0.5]]);
        assert!(matches!(p.embed("unknown"), Err(MetricsError::Provider(_))));
        assert_eq!(p.embed("  "), Err(MetricsError::Empty));
    }

    #[test]
    fn cache_serves_repeats() {
        let c = CachingProvider::new(FixtureProvider::from_reader(FIXTURE.as_bytes()).unwrap());
        let a = c.embed("few investors").unwrap();
        let b = c.embed("few investors").unwrap();
        assert_eq!(a, b);
        assert_eq!(c.misses(), 1);
        c.embed("strong funding").unwrap();
        assert_eq!(c.misses(), 2);
    }

    struct Flaky(Mutex<u32>);

    impl Transport for Flaky {
        fn post(&self, r: &HttpRequest) -> Result<HttpResponse, CallError> {
            let mut n = self.0.lock().unwrap();
            *n += 1;
            if *n == 1 {
                return Ok(HttpResponse { status: 503, body: String::new() });
            }
            let text = r.body["text"].as_str().unwrap();
            let tokens: Vec<&str> = text.split(' ').collect();
            let vectors: Vec<Vec<f64>> = (0..tokens.len()).map(|i| vec![1.0, i as f64]).collect();
            Ok(HttpResponse {
                status: 200,
                body: serde_json::json!({"tokens": tokens, "vectors": vectors}).to_string(),
            })
        }
    }

    #[test]
    fn http_provider_retries() {
        let policy = RetryPolicy {
            max_retries: 2,
            base: Duration::from_millis(1),
            ..Default::default()
        };
        let p = HttpEmbeddingProvider::with_transport("http://x", Arc::new(Flaky(Mutex::new(0))), policy, Duration::from_secs(1));
        let e = p.embed("a b c").unwrap();
        assert_eq!(e.len(), 3);
        assert_eq!(e.vectors[2], vec![1.0, 2.0]);
    }
}
