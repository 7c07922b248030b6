//! Prompt templates with `{placeholder}` substitution.

use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum TemplateError {
    #[error("template {template:?}: unresolved placeholder {{{placeholder}}}")]
    Unresolved { template: String, placeholder: String },
    #[error("template {template:?}: unterminated placeholder")]
    Unterminated { template: String },
    #[error("reading template {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PromptTemplate {
    pub name: String,
    pub body: String,
}

impl PromptTemplate {
    pub fn new(name: impl Into<String>, body: impl Into<String>) -> Self {
        Self {
            name: name.into(),
            body: body.into(),
        }
    }

    /// Placeholder names in order of appearance.
    pub fn placeholders(&self) -> Vec<&str> {
        let mut out = Vec::new();
        let mut rest = self.body.as_str();
        while let Some(open) = rest.find('{') {
            let after = &rest[open + 1..];
            match after.find('}') {
                Some(close) => {
                    out.push(&after[..close]);
                    rest = &after[close + 1..];
                }
                None => break,
            }
        }
        out
    }

    /// Substitutes every placeholder in a single pass. Substituted text is
    /// not rescanned, so values may contain braces.
    pub fn render(&self, vars: &[(&str, &str)]) -> Result<String, TemplateError> {
        let mut out = String::with_capacity(self.body.len() + 64);
        let mut rest = self.body.as_str();
        while let Some(open) = rest.find('{') {
            out.push_str(&rest[..open]);
            let after = &rest[open + 1..];
            let close = after.find('}').ok_or_else(|| TemplateError::Unterminated {
                template: self.name.clone(),
            })?;
            let key = &after[..close];
            let value = vars
                .iter()
                .find(|(k, _)| *k == key)
                .map(|(_, v)| *v)
                .ok_or_else(|| TemplateError::Unresolved {
                    template: self.name.clone(),
                    placeholder: key.to_owned(),
                })?;
            out.push_str(value);
            rest = &after[close + 1..];
        }
        out.push_str(rest);
        Ok(out.trim_end().to_owned())
    }
}

macro_rules! builtin {
    ($name:literal) => {
        ($name, include_str!(concat!("../templates/", $name, ".txt")))
    };
}

const BUILTIN: &[(&str, &str)] = &[
    builtin!("opro-generate"),
    builtin!("analyst-score"),
    builtin!("analyst-score-claim"),
    builtin!("direct-question"),
    builtin!("est-confidence"),
    builtin!("cot-reasoning"),
    builtin!("cot-decision"),
    builtin!("chatgpt-generate"),
    builtin!("chatgpt-score"),
    builtin!("debater-generate"),
    builtin!("opro-score"),
];

/// Every template shipped with the crate, by name.
pub fn builtin_templates() -> BTreeMap<String, PromptTemplate> {
    BUILTIN
        .iter()
        .map(|(name, body)| ((*name).to_owned(), PromptTemplate::new(*name, *body)))
        .collect()
}

/// The templates a pipeline run uses, one per role.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TemplateSet {
    pub generate: PromptTemplate,
    pub score: PromptTemplate,
    pub score_claim: PromptTemplate,
    pub direct_question: PromptTemplate,
    pub est_confidence: PromptTemplate,
    pub cot_reasoning: PromptTemplate,
    pub cot_decision: PromptTemplate,
}

impl Default for TemplateSet {
    fn default() -> Self {
        let t = builtin_templates();
        let get = |n: &str| t[n].clone();
        Self {
            generate: get("opro-generate"),
            score: get("analyst-score"),
            score_claim: get("analyst-score-claim"),
            direct_question: get("direct-question"),
            est_confidence: get("est-confidence"),
            cot_reasoning: get("cot-reasoning"),
            cot_decision: get("cot-decision"),
        }
    }
}

impl TemplateSet {
    /// The defaults, with any `<name>.txt` found in `dir` replacing the
    /// template of the same name.
    pub fn from_dir(dir: &Path) -> Result<Self, TemplateError> {
        let mut set = Self::default();
        for slot in set.slots_mut() {
            let path = dir.join(format!("{}.txt", slot.name));
            if path.exists() {
                slot.body = std::fs::read_to_string(&path).map_err(|source| TemplateError::Io {
                    path: path.display().to_string(),
                    source,
                })?;
            }
        }
        Ok(set)
    }

    /// Swaps in a named builtin template for the argument-generation role.
    pub fn with_generate(mut self, name: &str) -> Option<Self> {
        self.generate = builtin_templates().remove(name)?;
        Some(self)
    }

    /// Swaps in a named builtin template for the argument-scoring role.
    pub fn with_score(mut self, name: &str) -> Option<Self> {
        self.score = builtin_templates().remove(name)?;
        Some(self)
    }

    fn slots_mut(&mut self) -> [&mut PromptTemplate; 7] {
        [
            &mut self.generate,
            &mut self.score,
            &mut self.score_claim,
            &mut self.direct_question,
            &mut self.est_confidence,
            &mut self.cot_reasoning,
            &mut self.cot_decision,
        ]
    }
}
