//! Chat-completions client with a disk response cache and retries.

use std::collections::HashMap;
use std::fmt;
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::{Arc, Mutex};
use std::time::Duration;

use async_trait::async_trait;
use chrono::{DateTime, Utc};
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};
use sha2::{Digest, Sha256};
use tokio::sync::Semaphore;

use crate::backend::{Backend, BackendError, BackendKind, CompletionRequest, Purpose};

pub const ENV_API_KEY: &str = "QBAF_API_KEY";
pub const ENV_ENDPOINT: &str = "QBAF_ENDPOINT";
pub const ENV_MODEL: &str = "QBAF_MODEL";
pub const ENV_CACHE_DIR: &str = "QBAF_CACHE_DIR";

pub const DEFAULT_ENDPOINT: &str = "https://api.openai.com/v1/chat/completions";
pub const DEFAULT_MODEL: &str = "gpt-4o-mini";

/// Endpoint, model and decoding settings.
#[derive(Clone, Serialize, Deserialize)]
pub struct ModelConfig {
    /// Full URL of the chat-completions route.
    pub endpoint_url: String,
    pub model_name: String,
    #[serde(skip)]
    pub api_key: Option<String>,
    pub temperature: f64,
    pub top_p: f64,
    /// Token budget for argument generation and scoring calls.
    pub max_new_tokens_argument: u32,
    /// Token budget for baseline calls.
    pub max_new_tokens_baseline: u32,
    pub repetition_penalty: f64,
    pub timeout_secs: u64,
}

impl Default for ModelConfig {
    fn default() -> Self {
        Self {
            endpoint_url: DEFAULT_ENDPOINT.to_owned(),
            model_name: DEFAULT_MODEL.to_owned(),
            api_key: None,
            temperature: 0.7,
            top_p: 0.95,
            max_new_tokens_argument: 128,
            max_new_tokens_baseline: 768,
            repetition_penalty: 1.0,
            timeout_secs: 60,
        }
    }
}

impl fmt::Debug for ModelConfig {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("ModelConfig")
            .field("endpoint_url", &self.endpoint_url)
            .field("model_name", &self.model_name)
            .field("api_key", &self.api_key.as_ref().map(|_| "<redacted>"))
            .field("temperature", &self.temperature)
            .field("top_p", &self.top_p)
            .field("max_new_tokens_argument", &self.max_new_tokens_argument)
            .field("max_new_tokens_baseline", &self.max_new_tokens_baseline)
            .field("repetition_penalty", &self.repetition_penalty)
            .field("timeout_secs", &self.timeout_secs)
            .finish()
    }
}

impl ModelConfig {
    /// Defaults overridden by `QBAF_ENDPOINT`, `QBAF_MODEL` and `QBAF_API_KEY`.
    pub fn from_env() -> Self {
        let mut c = Self::default();
        if let Ok(v) = std::env::var(ENV_ENDPOINT) {
            c.endpoint_url = v;
        }
        if let Ok(v) = std::env::var(ENV_MODEL) {
            c.model_name = v;
        }
        c.api_key = std::env::var(ENV_API_KEY).ok();
        c
    }

    pub fn max_new_tokens(&self, purpose: Purpose) -> u32 {
        match purpose {
            Purpose::Argument | Purpose::Score => self.max_new_tokens_argument,
            Purpose::Baseline => self.max_new_tokens_baseline,
        }
    }

    /// The JSON body sent for `prompt`.
    pub fn request_body(&self, prompt: &str, purpose: Purpose) -> Value {
        json!({
            "model": self.model_name,
            "messages": [{ "role": "user", "content": prompt }],
            "temperature": self.temperature,
            "top_p": self.top_p,
            "max_tokens": self.max_new_tokens(purpose),
            "repetition_penalty": self.repetition_penalty,
        })
    }
}

/// One cached response on disk.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CacheEntry {
    pub key: String,
    pub request: Value,
    pub response_text: String,
    pub created_at: DateTime<Utc>,
}

/// Response cache with one JSON file per request digest.
#[derive(Debug)]
pub struct DiskCache {
    dir: PathBuf,
    locks: Mutex<HashMap<String, Arc<tokio::sync::Mutex<()>>>>,
}

impl DiskCache {
    pub fn new(dir: impl Into<PathBuf>) -> std::io::Result<Self> {
        let dir = dir.into();
        std::fs::create_dir_all(&dir)?;
        Ok(Self {
            dir,
            locks: Mutex::new(HashMap::new()),
        })
    }

    pub fn dir(&self) -> &Path {
        &self.dir
    }

    /// SHA-256 over endpoint, model and the full request body.
    pub fn key(endpoint: &str, model: &str, body: &Value) -> String {
        let mut h = Sha256::new();
        h.update(endpoint.as_bytes());
        h.update([0]);
        h.update(model.as_bytes());
        h.update([0]);
        h.update(body.to_string().as_bytes());
        hex::encode(h.finalize())
    }

    fn path(&self, key: &str) -> PathBuf {
        self.dir.join(format!("{key}.json"))
    }

    fn lock_for(&self, key: &str) -> Arc<tokio::sync::Mutex<()>> {
        let mut locks = self.locks.lock().expect("cache lock map poisoned");
        locks.entry(key.to_owned()).or_default().clone()
    }

    pub fn get(&self, key: &str) -> Option<CacheEntry> {
        let text = std::fs::read_to_string(self.path(key)).ok()?;
        match serde_json::from_str::<CacheEntry>(&text) {
            Ok(entry) if entry.key == key => Some(entry),
            Ok(_) => None,
            Err(e) => {
                tracing::warn!("ignoring corrupt cache entry {key}: {e}");
                None
            }
        }
    }

    pub fn put(&self, entry: &CacheEntry) -> std::io::Result<()> {
        let path = self.path(&entry.key);
        let tmp = path.with_extension(format!("json.{}.tmp", std::process::id()));
        std::fs::write(&tmp, serde_json::to_vec_pretty(entry)?)?;
        std::fs::rename(tmp, path)
    }
}

#[derive(Debug, Clone)]
pub struct ClientOptions {
    /// Where responses are cached. `None` disables caching.
    pub cache_dir: Option<PathBuf>,
    /// When false the cache is written but never read.
    pub read_cache: bool,
    pub max_in_flight: usize,
    pub max_attempts: u32,
    /// Delay before the second attempt; doubles after each failure.
    pub backoff: Duration,
}

impl Default for ClientOptions {
    fn default() -> Self {
        Self {
            cache_dir: None,
            read_cache: true,
            max_in_flight: 8,
            max_attempts: 3,
            backoff: Duration::from_millis(500),
        }
    }
}

impl ClientOptions {
    /// Harness runs cache by default; `QBAF_CACHE_DIR` overrides the location.
    pub fn for_batch() -> Self {
        let dir = std::env::var(ENV_CACHE_DIR).unwrap_or_else(|_| ".qbaf-cache".to_owned());
        Self {
            cache_dir: Some(PathBuf::from(dir)),
            ..Self::default()
        }
    }

    /// Interactive sessions skip the cache unless `QBAF_CACHE_DIR` is set.
    pub fn for_interactive() -> Self {
        Self {
            cache_dir: std::env::var(ENV_CACHE_DIR).ok().map(PathBuf::from),
            ..Self::default()
        }
    }
}

pub struct ChatClient {
    config: ModelConfig,
    options: ClientOptions,
    http: reqwest::Client,
    cache: Option<DiskCache>,
    in_flight: Semaphore,
    network_calls: AtomicUsize,
    cache_hits: AtomicUsize,
}

impl fmt::Debug for ChatClient {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("ChatClient")
            .field("config", &self.config)
            .field("options", &self.options)
            .finish()
    }
}

impl ChatClient {
    pub fn new(config: ModelConfig, options: ClientOptions) -> Result<Self, BackendError> {
        let http = reqwest::Client::builder()
            .timeout(Duration::from_secs(config.timeout_secs))
            .build()
            .map_err(|e| BackendError::Network(e.to_string()))?;
        let cache = options
            .cache_dir
            .as_ref()
            .map(DiskCache::new)
            .transpose()
            .map_err(|e| BackendError::Cache(e.to_string()))?;
        Ok(Self {
            in_flight: Semaphore::new(options.max_in_flight.max(1)),
            config,
            options,
            http,
            cache,
            network_calls: AtomicUsize::new(0),
            cache_hits: AtomicUsize::new(0),
        })
    }

    pub fn config(&self) -> &ModelConfig {
        &self.config
    }

    /// Requests actually sent over the network, retries included.
    pub fn network_calls(&self) -> usize {
        self.network_calls.load(Ordering::Relaxed)
    }

    pub fn cache_hits(&self) -> usize {
        self.cache_hits.load(Ordering::Relaxed)
    }

    async fn send_once(&self, body: &Value) -> Result<String, BackendError> {
        let _permit = self.in_flight.acquire().await.expect("semaphore never closed");
        self.network_calls.fetch_add(1, Ordering::Relaxed);
        let mut req = self.http.post(&self.config.endpoint_url).json(body);
        if let Some(key) = &self.config.api_key {
            req = req.bearer_auth(key);
        }
        let resp = req
            .send()
            .await
            .map_err(|e| BackendError::Network(e.to_string()))?;
        let status = resp.status();
        let text = resp
            .text()
            .await
            .map_err(|e| BackendError::Network(e.to_string()))?;
        match status.as_u16() {
            200..=299 => {}
            401 | 403 => return Err(BackendError::Auth(text)),
            429 => return Err(BackendError::RateLimited),
            code => return Err(BackendError::Server { status: code, body: text }),
        }
        let parsed: Value =
            serde_json::from_str(&text).map_err(|e| BackendError::Malformed(e.to_string()))?;
        parsed["choices"][0]["message"]["content"]
            .as_str()
            .map(str::to_owned)
            .ok_or_else(|| BackendError::Malformed("missing choices[0].message.content".into()))
    }

    async fn send_with_retries(&self, body: &Value) -> Result<String, BackendError> {
        let mut delay = self.options.backoff;
        let attempts = self.options.max_attempts.max(1);
        let mut attempt = 1;
        loop {
            match self.send_once(body).await {
                Ok(text) => return Ok(text),
                Err(e) if e.is_retryable() && attempt < attempts => {
                    tracing::warn!("attempt {attempt}/{attempts} failed: {e}; retrying in {delay:?}");
                    tokio::time::sleep(delay).await;
                    delay *= 2;
                    attempt += 1;
                }
                Err(e) => return Err(e),
            }
        }
    }

    /// Completes `prompt`, consulting the cache first when enabled.
    pub async fn complete_prompt(&self, prompt: &str, purpose: Purpose) -> Result<String, BackendError> {
        let body = self.config.request_body(prompt, purpose);
        let Some(cache) = &self.cache else {
            return self.send_with_retries(&body).await;
        };
        let key = DiskCache::key(&self.config.endpoint_url, &self.config.model_name, &body);
        let lock = cache.lock_for(&key);
        let _guard = lock.lock().await;
        if self.options.read_cache {
            if let Some(entry) = cache.get(&key) {
                self.cache_hits.fetch_add(1, Ordering::Relaxed);
                return Ok(entry.response_text);
            }
        }
        let text = self.send_with_retries(&body).await?;
        let entry = CacheEntry {
            key,
            request: body,
            response_text: text.clone(),
            created_at: Utc::now(),
        };
        if let Err(e) = cache.put(&entry) {
            tracing::warn!("could not write cache entry {}: {e}", entry.key);
        }
        Ok(text)
    }
}

#[async_trait]
impl Backend for ChatClient {
    fn kind(&self) -> BackendKind {
        BackendKind::Llm
    }

    fn describe(&self) -> String {
        self.config.model_name.clone()
    }

    async fn complete(&self, request: &CompletionRequest) -> Result<String, BackendError> {
        self.complete_prompt(&request.prompt, request.purpose()).await
    }
}
