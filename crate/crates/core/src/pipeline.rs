//! End-to-end claim verification: the argumentative method and three prompting baselines.

use std::fmt;
use std::str::FromStr;
use std::sync::OnceLock;

use regex::Regex;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::backend::{ask, Backend, BackendError, Task, Transcript};
use crate::decision::decide;
use crate::generation::{
    assign_base_scores, generate_baf, parse_confidence, ClaimBaseMode, GenerationError,
    GenerationParams,
};
use crate::qbaf::Qbaf;
use crate::semantics::{evaluate, SemanticsError, SemanticsId, StrengthMap};
use crate::templates::{TemplateError, TemplateSet};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Claim {
    pub id: String,
    pub text: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub context: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub gold_label: Option<bool>,
}

impl Claim {
    pub fn new(id: impl Into<String>, text: impl Into<String>) -> Self {
        Self {
            id: id.into(),
            text: text.into(),
            context: None,
            gold_label: None,
        }
    }

    pub fn with_context(mut self, context: impl Into<String>) -> Self {
        self.context = Some(context.into());
        self
    }

    pub fn with_label(mut self, label: bool) -> Self {
        self.gold_label = Some(label);
        self
    }
}

/// The claim text a model sees: the bare claim, or the claim placed after
/// its background information.
pub fn condition_claim(claim: &Claim, transcript: &mut Transcript) -> String {
    match claim.context.as_deref().map(str::trim) {
        None => claim.text.clone(),
        Some("") => {
            transcript.warn(format!("claim {}: empty context ignored", claim.id));
            claim.text.clone()
        }
        Some(info) => format!(
            "Consider the following background information: {info} \
             Given the background information the following is correct: {}",
            claim.text
        ),
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    #[default]
    Argllm,
    DirectQuestion,
    EstConfidence,
    ChainOfThought,
}

impl Method {
    pub const ALL: [Method; 4] = [
        Method::Argllm,
        Method::DirectQuestion,
        Method::EstConfidence,
        Method::ChainOfThought,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Method::Argllm => "argllm",
            Method::DirectQuestion => "direct_question",
            Method::EstConfidence => "est_confidence",
            Method::ChainOfThought => "chain_of_thought",
        }
    }

    /// Whether the method produces a framework that can be contested.
    pub fn is_contestable(self) -> bool {
        self == Method::Argllm
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Method {
    type Err = PipelineError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Method::ALL
            .into_iter()
            .find(|m| m.as_str() == s)
            .ok_or_else(|| PipelineError::UnknownMethod(s.to_owned()))
    }
}

/// A verification method together with its settings. `semantics` and
/// `generation` only matter for [`Method::Argllm`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct MethodConfig {
    #[serde(default)]
    pub method: Method,
    #[serde(default = "default_semantics")]
    pub semantics: SemanticsId,
    #[serde(default)]
    pub generation: GenerationParams,
}

fn default_semantics() -> SemanticsId {
    SemanticsId::DfQuad
}

impl MethodConfig {
    pub fn baseline(method: Method) -> Self {
        Self {
            method,
            semantics: SemanticsId::DfQuad,
            generation: GenerationParams::default(),
        }
    }

    pub fn argllm(semantics: SemanticsId, generation: GenerationParams) -> Self {
        Self {
            method: Method::Argllm,
            semantics,
            generation,
        }
    }

    /// The three baselines followed by the four argumentative variants
    /// (base mode x depth 1, 2), all under `semantics`.
    pub fn table_columns(semantics: SemanticsId) -> Vec<MethodConfig> {
        let mut out: Vec<_> = [Method::DirectQuestion, Method::EstConfidence, Method::ChainOfThought]
            .into_iter()
            .map(Self::baseline)
            .collect();
        for depth in [1, 2] {
            for mode in [ClaimBaseMode::FixedHalf, ClaimBaseMode::Estimated] {
                out.push(Self::argllm(semantics, GenerationParams::new(depth, mode)));
            }
        }
        out
    }

    /// Column heading for result tables.
    pub fn label(&self) -> String {
        match self.method {
            Method::DirectQuestion => "Direct Question".into(),
            Method::EstConfidence => "Est. Confidence".into(),
            Method::ChainOfThought => "Chain-of-Thought".into(),
            Method::Argllm => {
                let base = match self.generation.claim_base_mode {
                    ClaimBaseMode::FixedHalf => "0.5",
                    ClaimBaseMode::Estimated => "Est.",
                };
                let mut s = format!("{base} Base Arg (D={})", self.generation.depth);
                if self.semantics != SemanticsId::DfQuad {
                    s.push_str(&format!(" [{}]", self.semantics));
                }
                s
            }
        }
    }
}

impl FromStr for MethodConfig {
    type Err = PipelineError;

    /// Accepts a bare method name, or `argllm-<half|est>-d<depth>` with an
    /// optional `-<semantics>` suffix, e.g. `argllm-est-d2-qem`.
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        if let Ok(method) = s.parse::<Method>() {
            return Ok(if method == Method::Argllm {
                Self::argllm(SemanticsId::DfQuad, GenerationParams::default())
            } else {
                Self::baseline(method)
            });
        }
        let bad = || PipelineError::UnknownMethod(s.to_owned());
        let mut parts = s.splitn(4, '-');
        if parts.next() != Some("argllm") {
            return Err(bad());
        }
        let mode = match parts.next() {
            Some("half") => ClaimBaseMode::FixedHalf,
            Some("est") => ClaimBaseMode::Estimated,
            _ => return Err(bad()),
        };
        let depth: usize = parts
            .next()
            .and_then(|d| d.strip_prefix('d'))
            .and_then(|d| d.parse().ok())
            .filter(|d| *d >= 1)
            .ok_or_else(bad)?;
        let semantics = match parts.next() {
            None => SemanticsId::DfQuad,
            Some(name) => name.parse().map_err(|_| bad())?,
        };
        if parts.next().is_some() {
            return Err(bad());
        }
        Ok(Self::argllm(semantics, GenerationParams::new(depth, mode)))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Verdict {
    pub label: bool,
    pub root_strength: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub qbaf: Option<Qbaf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub strengths: Option<StrengthMap>,
    pub method: String,
    pub transcript: Transcript,
}

#[derive(Debug, Error)]
pub enum PipelineError {
    #[error("unknown method {0:?}")]
    UnknownMethod(String),
    #[error("claim {0:?} has no text")]
    EmptyClaim(String),
    #[error(transparent)]
    Generation(#[from] GenerationError),
    #[error(transparent)]
    Backend(#[from] BackendError),
    #[error(transparent)]
    Template(#[from] TemplateError),
    #[error("generated framework could not be evaluated: {0}")]
    Semantics(#[from] SemanticsError),
    #[error("could not read an answer from {0:?}")]
    Unparseable(String),
}

fn truth_pattern() -> &'static Regex {
    static RE: OnceLock<Regex> = OnceLock::new();
    RE.get_or_init(|| Regex::new(r"(?i)\b(true|false)\b").expect("static regex"))
}

/// The first standalone `true` or `false` in `text`, ignoring case.
pub fn parse_truth(text: &str) -> Option<bool> {
    truth_pattern()
        .find(text)
        .map(|m| m.as_str().eq_ignore_ascii_case("true"))
}

/// Asks until the answer holds a true/false token, at most twice.
async fn ask_truth(
    backend: &dyn Backend,
    prompt: String,
    task: Task,
    transcript: &mut Transcript,
) -> Result<bool, PipelineError> {
    let mut last = String::new();
    for attempt in 0..2 {
        let (answer, exchange) = ask(backend, prompt.clone(), task.clone()).await?;
        transcript.exchanges.push(exchange);
        if let Some(label) = parse_truth(&answer) {
            return Ok(label);
        }
        if attempt == 0 {
            transcript.warn(format!("no true/false in {answer:?}; asking again"));
        }
        last = answer;
    }
    Err(PipelineError::Unparseable(last))
}

fn check_claim(claim: &Claim) -> Result<(), PipelineError> {
    if claim.text.trim().is_empty() {
        return Err(PipelineError::EmptyClaim(claim.id.clone()));
    }
    Ok(())
}

pub async fn verify_argllm(
    claim: &Claim,
    config: &MethodConfig,
    backend: &dyn Backend,
    templates: &TemplateSet,
) -> Result<Verdict, PipelineError> {
    check_claim(claim)?;
    let mut transcript = Transcript::default();
    let text = condition_claim(claim, &mut transcript);
    let baf = generate_baf(&text, backend, templates, &config.generation, &mut transcript).await?;
    let qbaf = assign_base_scores(baf, backend, templates, &config.generation, &mut transcript).await?;
    let strengths = evaluate(&qbaf, config.semantics.semantics())?;
    let root_strength = strengths.get(qbaf.root()).expect("root is evaluated");
    Ok(Verdict {
        label: decide(root_strength),
        root_strength,
        qbaf: Some(qbaf),
        strengths: Some(strengths),
        method: config.label(),
        transcript,
    })
}

pub async fn verify_direct_question(
    claim: &Claim,
    config: &MethodConfig,
    backend: &dyn Backend,
    templates: &TemplateSet,
) -> Result<Verdict, PipelineError> {
    check_claim(claim)?;
    let mut transcript = Transcript::default();
    let text = condition_claim(claim, &mut transcript);
    let prompt = templates.direct_question.render(&[("claim", &text)])?;
    let label = ask_truth(backend, prompt, Task::DirectQuestion, &mut transcript).await?;
    Ok(Verdict {
        label,
        root_strength: if label { 1.0 } else { 0.0 },
        qbaf: None,
        strengths: None,
        method: config.label(),
        transcript,
    })
}

pub async fn verify_est_confidence(
    claim: &Claim,
    config: &MethodConfig,
    backend: &dyn Backend,
    templates: &TemplateSet,
) -> Result<Verdict, PipelineError> {
    check_claim(claim)?;
    let mut transcript = Transcript::default();
    let text = condition_claim(claim, &mut transcript);
    let prompt = templates.est_confidence.render(&[("claim", &text)])?;
    let (answer, exchange) = ask(backend, prompt, Task::Confidence).await?;
    transcript.exchanges.push(exchange);
    let strength = parse_confidence(&answer).map_err(|e| PipelineError::Unparseable(e.text))?;
    Ok(Verdict {
        label: decide(strength),
        root_strength: strength,
        qbaf: None,
        strengths: None,
        method: config.label(),
        transcript,
    })
}

pub async fn verify_chain_of_thought(
    claim: &Claim,
    config: &MethodConfig,
    backend: &dyn Backend,
    templates: &TemplateSet,
) -> Result<Verdict, PipelineError> {
    check_claim(claim)?;
    let mut transcript = Transcript::default();
    let text = condition_claim(claim, &mut transcript);
    let prompt = templates.cot_reasoning.render(&[("claim", &text)])?;
    let (reasoning, exchange) = ask(backend, prompt, Task::Reasoning).await?;
    transcript.exchanges.push(exchange);
    let prompt = templates.cot_decision.render(&[
        ("claim", &text),
        ("Reasoning/Output from previous step", reasoning.trim()),
    ])?;
    let label = ask_truth(backend, prompt, Task::Decision, &mut transcript).await?;
    Ok(Verdict {
        label,
        root_strength: if label { 1.0 } else { 0.0 },
        qbaf: None,
        strengths: None,
        method: config.label(),
        transcript,
    })
}

pub async fn verify(
    claim: &Claim,
    config: &MethodConfig,
    backend: &dyn Backend,
    templates: &TemplateSet,
) -> Result<Verdict, PipelineError> {
    match config.method {
        Method::Argllm => verify_argllm(claim, config, backend, templates).await,
        Method::DirectQuestion => verify_direct_question(claim, config, backend, templates).await,
        Method::EstConfidence => verify_est_confidence(claim, config, backend, templates).await,
        Method::ChainOfThought => verify_chain_of_thought(claim, config, backend, templates).await,
    }
}
