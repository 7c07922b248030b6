//! Growing an argument tree around a claim and scoring its arguments.
//!
//! [`generate_baf`] expands the claim breadth-first: every argument above the
//! configured depth receives its supporters, then its attackers, each written
//! by one backend completion. [`assign_base_scores`] then asks the backend how
//! convincing each argument is relative to its parent.

use std::sync::OnceLock;

use futures::future::try_join_all;
use regex::Regex;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::backend::{ask, Backend, BackendError, Exchange, Task, Transcript};
use crate::qbaf::{ArgumentId, Baf, BafArgument, Polarity, Qbaf, Relation, Violation};
use crate::templates::{TemplateError, TemplateSet};

/// Base score given to the claim in `fixed_half` mode and used when a
/// confidence cannot be parsed.
pub const NEUTRAL_SCORE: f64 = 0.5;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ClaimBaseMode {
    /// The claim starts at exactly 0.5.
    #[default]
    FixedHalf,
    /// The claim's base score is estimated by the backend.
    Estimated,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct GenerationParams {
    /// Length of the path from the claim to the leaves.
    pub depth: usize,
    /// Supporters generated for each non-leaf argument.
    pub supporters: usize,
    /// Attackers generated for each non-leaf argument.
    pub attackers: usize,
    pub claim_base_mode: ClaimBaseMode,
}

impl Default for GenerationParams {
    fn default() -> Self {
        Self {
            depth: 1,
            supporters: 1,
            attackers: 1,
            claim_base_mode: ClaimBaseMode::FixedHalf,
        }
    }
}

impl GenerationParams {
    pub fn new(depth: usize, claim_base_mode: ClaimBaseMode) -> Self {
        Self {
            depth,
            claim_base_mode,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<(), GenerationError> {
        if self.depth == 0 {
            return Err(GenerationError::InvalidParams("depth must be at least 1".into()));
        }
        Ok(())
    }

    /// Depths other than 1 and 2 work but have not been studied.
    pub fn is_experimental(&self) -> bool {
        !(1..=2).contains(&self.depth)
    }

    /// Number of arguments in the generated tree, claim included.
    pub fn expected_size(&self) -> usize {
        let width = self.supporters + self.attackers;
        (0..=self.depth).map(|k| width.pow(k as u32)).sum()
    }
}

#[derive(Debug, Error)]
pub enum GenerationError {
    #[error("invalid generation parameters: {0}")]
    InvalidParams(String),
    #[error("claim is empty")]
    EmptyClaim,
    #[error("backend failure while generating {node}: {source}")]
    Backend {
        node: ArgumentId,
        #[source]
        source: BackendError,
    },
    #[error(transparent)]
    Template(#[from] TemplateError),
    #[error("generated framework is invalid: {0:?}")]
    Invalid(Vec<Violation>),
}

#[derive(Debug, Error, Clone, PartialEq)]
#[error("no number found in {text:?}")]
pub struct ConfidenceParseError {
    pub text: String,
}

fn number_pattern() -> &'static Regex {
    static RE: OnceLock<Regex> = OnceLock::new();
    RE.get_or_init(|| Regex::new(r"\d+(?:\.\d+)?").expect("static regex"))
}

/// Maps the first number in `text` from the 0..100 scale onto `[0, 1]`,
/// clamping out-of-range values.
pub fn parse_confidence(text: &str) -> Result<f64, ConfidenceParseError> {
    let m = number_pattern().find(text).ok_or_else(|| ConfidenceParseError {
        text: text.to_owned(),
    })?;
    let value: f64 = m.as_str().parse().map_err(|_| ConfidenceParseError {
        text: text.to_owned(),
    })?;
    Ok(value.clamp(0.0, 100.0) / 100.0)
}

/// Renders a `[0, 1]` confidence back on the 0..100 scale.
pub fn render_confidence(value: f64) -> String {
    let pct = (value * 100.0 * 1e9).round() / 1e9;
    let s = format!("{pct:.9}");
    s.trim_end_matches('0').trim_end_matches('.').to_owned()
}

fn argument_id(index: usize) -> ArgumentId {
    ArgumentId::new(format!("a{index}"))
}

fn generation_vars(parent: &str, polarity: Polarity) -> [(&str, &str); 3] {
    let (ing, verb) = match polarity {
        Polarity::Support => ("supporting", "support"),
        Polarity::Attack => ("attacking", "attack"),
    };
    [
        ("claim", parent),
        ("supporting|attacking", ing),
        ("support|attack", verb),
    ]
}

fn scoring_vars<'a>(parent: &'a str, argument: &'a str, polarity: Polarity) -> [(&'a str, &'a str); 4] {
    let (favour, verb) = match polarity {
        Polarity::Support => ("in favour of", "supports"),
        Polarity::Attack => ("against", "refutes"),
    };
    [
        ("claim", parent),
        ("argument", argument),
        ("in favour of|against", favour),
        ("supports|refutes", verb),
    ]
}

/// Builds the argument tree for `claim` with base scores unset.
pub async fn generate_baf(
    claim: &str,
    backend: &dyn Backend,
    templates: &TemplateSet,
    params: &GenerationParams,
    transcript: &mut Transcript,
) -> Result<Baf, GenerationError> {
    params.validate()?;
    let claim = claim.trim();
    if claim.is_empty() {
        return Err(GenerationError::EmptyClaim);
    }
    if params.is_experimental() {
        transcript.warn(format!("depth {} is experimental", params.depth));
    }

    let root = argument_id(0);
    let mut arguments = vec![BafArgument {
        id: root.clone(),
        text: claim.to_owned(),
    }];
    let mut relations = Vec::new();
    let mut frontier = vec![0usize];

    for _ in 0..params.depth {
        // Positions are fixed before any call so concurrent completion cannot
        // change the ids or order of the result.
        let mut planned = Vec::new();
        for &parent in &frontier {
            let slots = (0..params.supporters)
                .map(|k| (Polarity::Support, k))
                .chain((0..params.attackers).map(|k| (Polarity::Attack, k)));
            for (polarity, k) in slots {
                let index = arguments.len() + planned.len();
                planned.push((parent, polarity, k, index));
            }
        }
        let calls = planned.iter().map(|&(parent, polarity, k, index)| {
            let parent_text = arguments[parent].text.clone();
            async move {
                let prompt = templates
                    .generate
                    .render(&generation_vars(&parent_text, polarity))?;
                let task = Task::GenerateArgument {
                    parent: parent_text,
                    polarity,
                    index: k,
                };
                let node = argument_id(index);
                let (text, exchange) = ask(backend, prompt, task)
                    .await
                    .map_err(|source| GenerationError::Backend {
                        node: node.clone(),
                        source,
                    })?;
                let text = text.trim().to_owned();
                if text.is_empty() {
                    return Err(GenerationError::Backend {
                        node,
                        source: BackendError::EmptyCompletion,
                    });
                }
                Ok::<(String, Exchange), GenerationError>((text, exchange))
            }
        });
        let results = try_join_all(calls).await?;

        let mut next = Vec::with_capacity(planned.len());
        for ((parent, polarity, _, index), (text, exchange)) in planned.into_iter().zip(results) {
            debug_assert_eq!(index, arguments.len());
            let id = argument_id(index);
            relations.push(Relation::new(id.clone(), arguments[parent].id.clone(), polarity));
            arguments.push(BafArgument { id, text });
            transcript.exchanges.push(exchange);
            next.push(index);
        }
        frontier = next;
    }

    let baf = Baf::new(root, arguments, relations);
    baf.validate().map_err(GenerationError::Invalid)?;
    Ok(baf)
}

/// Asks for a confidence, retrying once on unparseable output and falling
/// back to [`NEUTRAL_SCORE`] with a warning.
async fn score(
    backend: &dyn Backend,
    prompt: String,
    task: Task,
    node: &ArgumentId,
) -> Result<(f64, Vec<Exchange>, Option<String>), GenerationError> {
    let mut exchanges = Vec::new();
    for _ in 0..2 {
        let (text, exchange) = ask(backend, prompt.clone(), task.clone())
            .await
            .map_err(|source| GenerationError::Backend {
                node: node.clone(),
                source,
            })?;
        exchanges.push(exchange);
        if let Ok(v) = parse_confidence(&text) {
            return Ok((v, exchanges, None));
        }
    }
    let warning = format!("no confidence found for {node}; using {NEUTRAL_SCORE}");
    Ok((NEUTRAL_SCORE, exchanges, Some(warning)))
}

/// Attaches a base score to every argument of `baf`.
pub async fn assign_base_scores(
    baf: Baf,
    backend: &dyn Backend,
    templates: &TemplateSet,
    params: &GenerationParams,
    transcript: &mut Transcript,
) -> Result<Qbaf, GenerationError> {
    baf.validate().map_err(GenerationError::Invalid)?;

    let mut jobs = Vec::new();
    for arg in baf.arguments() {
        if &arg.id == baf.root() {
            if params.claim_base_mode == ClaimBaseMode::Estimated {
                let prompt = templates.score_claim.render(&[("claim", arg.text.as_str())])?;
                jobs.push((arg.id.clone(), prompt, Task::ScoreClaim));
            }
            continue;
        }
        let edge = baf.parent_edge(&arg.id).expect("validated tree");
        let parent_text = baf.text(&edge.target).expect("validated tree");
        let prompt = templates
            .score
            .render(&scoring_vars(parent_text, &arg.text, edge.polarity))?;
        jobs.push((
            arg.id.clone(),
            prompt,
            Task::ScoreArgument {
                polarity: edge.polarity,
            },
        ));
    }

    let results = try_join_all(
        jobs.iter()
            .map(|(id, prompt, task)| score(backend, prompt.clone(), task.clone(), id)),
    )
    .await?;

    let mut scores = std::collections::HashMap::new();
    for ((id, _, _), (value, exchanges, warning)) in jobs.into_iter().zip(results) {
        transcript.exchanges.extend(exchanges);
        if let Some(w) = warning {
            transcript.warn(w);
        }
        scores.insert(id, value);
    }
    let root = baf.root().clone();
    let qbaf = baf.with_base_scores(|id| {
        if id == &root && params.claim_base_mode == ClaimBaseMode::FixedHalf {
            NEUTRAL_SCORE
        } else {
            scores[id]
        }
    });
    qbaf.ensure_valid()
        .map_err(|e| match e {
            crate::qbaf::QbafError::Invalid(v) => GenerationError::Invalid(v),
            other => GenerationError::InvalidParams(other.to_string()),
        })?;
    Ok(qbaf)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::backend::{BackendKind, CompletionRequest, MockBackend};
    use async_trait::async_trait;
    use std::sync::Mutex;

    #[test]
    fn confidence_examples() {
        assert_eq!(parse_confidence("85").unwrap(), 0.85);
        assert_eq!(parse_confidence("Confidence: 70 out of 100.").unwrap(), 0.70);
        assert_eq!(parse_confidence("120").unwrap(), 1.0);
        assert_eq!(parse_confidence("about 12.5 percent").unwrap(), 0.125);
        assert!(parse_confidence("no idea").is_err());
    }

    #[test]
    fn render_round_trips() {
        for v in [0.0, 0.07, 0.125, 0.85, 1.0] {
            assert_eq!(parse_confidence(&render_confidence(v)).unwrap(), v);
        }
        assert_eq!(render_confidence(0.85), "85");
    }

    #[test]
    fn expected_sizes() {
        assert_eq!(GenerationParams::new(1, ClaimBaseMode::FixedHalf).expected_size(), 3);
        assert_eq!(GenerationParams::new(2, ClaimBaseMode::FixedHalf).expected_size(), 7);
        assert!(GenerationParams::new(0, ClaimBaseMode::FixedHalf).validate().is_err());
        assert!(GenerationParams::new(3, ClaimBaseMode::FixedHalf).is_experimental());
    }

    /// Answers from a fixed script keyed by task label.
    struct Scripted {
        score: Mutex<Vec<&'static str>>,
    }

    #[async_trait]
    impl Backend for Scripted {
        fn kind(&self) -> BackendKind {
            BackendKind::Mock
        }
        fn describe(&self) -> String {
            "scripted".into()
        }
        async fn complete(&self, request: &CompletionRequest) -> Result<String, BackendError> {
            match &request.task {
                Task::GenerateArgument { polarity, .. } => Ok(format!("  {polarity} text \n")),
                _ => Ok(self.score.lock().unwrap().remove(0).to_owned()),
            }
        }
    }

    #[tokio::test]
    async fn tree_sizes_match_params() {
        let mock = MockBackend::new(7);
        let set = TemplateSet::default();
        for (depth, size) in [(1, 3), (2, 7)] {
            let mut t = Transcript::default();
            let params = GenerationParams::new(depth, ClaimBaseMode::FixedHalf);
            let baf = generate_baf("Water boils at 100C at sea level.", &mock, &set, &params, &mut t)
                .await
                .unwrap();
            assert_eq!(baf.len(), size);
            assert_eq!(t.len(), size - 1);
            let q = assign_base_scores(baf, &mock, &set, &params, &mut t).await.unwrap();
            assert_eq!(q.argument(q.root()).unwrap().base_score, 0.5);
        }
    }

    #[tokio::test]
    async fn text_is_trimmed_and_scores_parsed() {
        let backend = Scripted {
            score: Mutex::new(vec!["85", "70"]),
        };
        let set = TemplateSet::default();
        let params = GenerationParams::default();
        let mut t = Transcript::default();
        let baf = generate_baf("c", &backend, &set, &params, &mut t).await.unwrap();
        assert_eq!(baf.text(&"a1".into()), Some("support text"));
        assert_eq!(baf.parent_edge(&"a2".into()).unwrap().polarity, Polarity::Attack);
        let q = assign_base_scores(baf, &backend, &set, &params, &mut t).await.unwrap();
        assert_eq!(q.argument(&"a1".into()).unwrap().base_score, 0.85);
        assert_eq!(q.argument(&"a2".into()).unwrap().base_score, 0.70);
    }

    #[tokio::test]
    async fn unparseable_scores_fall_back_to_neutral() {
        let backend = Scripted {
            score: Mutex::new(vec!["hmm", "still no", "40", "x"]),
        };
        let set = TemplateSet::default();
        let params = GenerationParams {
            depth: 1,
            supporters: 1,
            attackers: 0,
            claim_base_mode: ClaimBaseMode::FixedHalf,
        };
        let mut t = Transcript::default();
        let baf = generate_baf("c", &backend, &set, &params, &mut t).await.unwrap();
        let q = assign_base_scores(baf, &backend, &set, &params, &mut t).await.unwrap();
        assert_eq!(q.argument(&"a1".into()).unwrap().base_score, NEUTRAL_SCORE);
        assert_eq!(t.warnings.len(), 1);
        // one generation call plus two scoring attempts
        assert_eq!(t.len(), 3);
    }

    #[tokio::test]
    async fn empty_completion_is_a_backend_failure() {
        struct Blank;
        #[async_trait]
        impl Backend for Blank {
            fn kind(&self) -> BackendKind {
                BackendKind::Mock
            }
            fn describe(&self) -> String {
                "blank".into()
            }
            async fn complete(&self, _: &CompletionRequest) -> Result<String, BackendError> {
                Ok("   ".into())
            }
        }
        let mut t = Transcript::default();
        let err = generate_baf("c", &Blank, &TemplateSet::default(), &GenerationParams::default(), &mut t)
            .await
            .unwrap_err();
        assert!(matches!(
            err,
            GenerationError::Backend {
                source: BackendError::EmptyCompletion,
                ..
            }
        ));
        let err = generate_baf(" ", &Blank, &TemplateSet::default(), &GenerationParams::default(), &mut t)
            .await
            .unwrap_err();
        assert!(matches!(err, GenerationError::EmptyClaim));
    }
}
