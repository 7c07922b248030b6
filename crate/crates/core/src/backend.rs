//! Text-completion backends: the generative/evaluative model behind every prompt.

use std::sync::atomic::{AtomicUsize, Ordering};

use async_trait::async_trait;
use chrono::{DateTime, Utc};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::qbaf::Polarity;

/// What a completion is for. Selects the token budget.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Purpose {
    Argument,
    Score,
    Baseline,
}

/// The role a prompt plays in a pipeline. Network backends ignore it; the
/// mock backend uses it to produce well-shaped answers.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "task", rename_all = "snake_case")]
pub enum Task {
    GenerateArgument {
        parent: String,
        polarity: Polarity,
        index: usize,
    },
    ScoreArgument {
        polarity: Polarity,
    },
    ScoreClaim,
    DirectQuestion,
    Confidence,
    Reasoning,
    Decision,
}

impl Task {
    pub fn purpose(&self) -> Purpose {
        match self {
            Task::GenerateArgument { .. } => Purpose::Argument,
            Task::ScoreArgument { .. } | Task::ScoreClaim => Purpose::Score,
            Task::DirectQuestion | Task::Confidence | Task::Reasoning | Task::Decision => {
                Purpose::Baseline
            }
        }
    }

    pub fn label(&self) -> &'static str {
        match self {
            Task::GenerateArgument { .. } => "generate_argument",
            Task::ScoreArgument { .. } => "score_argument",
            Task::ScoreClaim => "score_claim",
            Task::DirectQuestion => "direct_question",
            Task::Confidence => "confidence",
            Task::Reasoning => "reasoning",
            Task::Decision => "decision",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CompletionRequest {
    pub prompt: String,
    pub task: Task,
}

impl CompletionRequest {
    pub fn new(prompt: impl Into<String>, task: Task) -> Self {
        Self {
            prompt: prompt.into(),
            task,
        }
    }

    pub fn purpose(&self) -> Purpose {
        self.task.purpose()
    }
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum BackendError {
    #[error("network error: {0}")]
    Network(String),
    #[error("authentication failed: {0}")]
    Auth(String),
    #[error("rate limited")]
    RateLimited,
    #[error("server error {status}: {body}")]
    Server { status: u16, body: String },
    #[error("malformed response: {0}")]
    Malformed(String),
    #[error("empty completion")]
    EmptyCompletion,
    #[error("cache error: {0}")]
    Cache(String),
}

impl BackendError {
    /// Transient failures worth another attempt.
    pub fn is_retryable(&self) -> bool {
        match self {
            BackendError::Network(_) | BackendError::RateLimited => true,
            BackendError::Server { status, .. } => *status >= 500,
            _ => false,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BackendKind {
    Llm,
    Mock,
}

#[async_trait]
pub trait Backend: Send + Sync {
    fn kind(&self) -> BackendKind;

    /// Short human-readable name, used as the model column of result tables.
    fn describe(&self) -> String;

    async fn complete(&self, request: &CompletionRequest) -> Result<String, BackendError>;
}

/// One prompt/response pair, kept for auditing.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Exchange {
    pub task: String,
    pub prompt: String,
    pub response: String,
    pub at: DateTime<Utc>,
}

/// Model interactions and warnings accumulated while answering one claim.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Transcript {
    pub exchanges: Vec<Exchange>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub warnings: Vec<String>,
}

impl Transcript {
    pub fn warn(&mut self, message: impl Into<String>) {
        let message = message.into();
        tracing::warn!("{message}");
        self.warnings.push(message);
    }

    pub fn extend(&mut self, other: Transcript) {
        self.exchanges.extend(other.exchanges);
        self.warnings.extend(other.warnings);
    }

    pub fn len(&self) -> usize {
        self.exchanges.len()
    }

    pub fn is_empty(&self) -> bool {
        self.exchanges.is_empty()
    }
}

/// Sends one prompt and records the exchange.
pub async fn ask(
    backend: &dyn Backend,
    prompt: String,
    task: Task,
) -> Result<(String, Exchange), BackendError> {
    let request = CompletionRequest::new(prompt, task);
    let response = backend.complete(&request).await?;
    let exchange = Exchange {
        task: request.task.label().to_owned(),
        prompt: request.prompt,
        response: response.clone(),
        at: Utc::now(),
    };
    Ok((response, exchange))
}

/// Offline backend whose answers depend only on its seed and the request.
///
/// Arguments read `Supporting point #k for: <parent prefix>` (or
/// `Attacking point #k against: ...`), scores are pseudo-random integers in
/// 0..=100, and true/false questions get a pseudo-random `True` or `False`.
#[derive(Debug, Default)]
pub struct MockBackend {
    seed: u64,
    calls: AtomicUsize,
}

const PARENT_PREFIX_CHARS: usize = 48;

impl MockBackend {
    pub fn new(seed: u64) -> Self {
        Self {
            seed,
            calls: AtomicUsize::new(0),
        }
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn calls(&self) -> usize {
        self.calls.load(Ordering::Relaxed)
    }

    fn rng_for(&self, request: &CompletionRequest) -> ChaCha8Rng {
        let mut hasher = Sha256::new();
        hasher.update(self.seed.to_le_bytes());
        hasher.update(request.task.label().as_bytes());
        hasher.update(request.prompt.as_bytes());
        let digest = hasher.finalize();
        let mut seed = [0u8; 32];
        seed.copy_from_slice(&digest);
        ChaCha8Rng::from_seed(seed)
    }

    /// The deterministic answer to `request`.
    pub fn answer(&self, request: &CompletionRequest) -> String {
        let mut rng = self.rng_for(request);
        match &request.task {
            Task::GenerateArgument {
                parent,
                polarity,
                index,
            } => {
                let prefix: String = parent.chars().take(PARENT_PREFIX_CHARS).collect();
                match polarity {
                    Polarity::Support => format!("Supporting point #{} for: {prefix}", index + 1),
                    Polarity::Attack => format!("Attacking point #{} against: {prefix}", index + 1),
                }
            }
            Task::ScoreArgument { .. } | Task::ScoreClaim | Task::Confidence => {
                rng.random_range(0..=100u32).to_string()
            }
            Task::DirectQuestion | Task::Decision => {
                if rng.random::<bool>() { "True" } else { "False" }.to_owned()
            }
            Task::Reasoning => {
                let n = rng.random_range(2..=4u32);
                (1..=n)
                    .map(|i| format!("Step {i}: consideration {}.", rng.random_range(1..=99u32)))
                    .collect::<Vec<_>>()
                    .join("\n")
            }
        }
    }
}

#[async_trait]
impl Backend for MockBackend {
    fn kind(&self) -> BackendKind {
        BackendKind::Mock
    }

    fn describe(&self) -> String {
        format!("mock(seed={})", self.seed)
    }

    async fn complete(&self, request: &CompletionRequest) -> Result<String, BackendError> {
        self.calls.fetch_add(1, Ordering::Relaxed);
        Ok(self.answer(request))
    }
}
