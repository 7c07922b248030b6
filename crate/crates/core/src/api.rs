//! Request and response bodies of the HTTP service.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::backend::Transcript;
use crate::contestation::{ContestationDiff, ContestationEdit};
use crate::decision::DECISION_THRESHOLD;
use crate::pipeline::{MethodConfig, Verdict};
use crate::qbaf::{ArgumentId, Qbaf, Stance};
use crate::semantics::{SemanticsId, StrengthMap};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VerifyRequest {
    pub claim: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub context: Option<String>,
    #[serde(flatten)]
    pub config: MethodConfig,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VerifyResponse {
    pub verdict: Verdict,
    /// Present for methods whose verdict can be contested.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub session_id: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CreateSessionRequest {
    pub qbaf: Qbaf,
    #[serde(default = "default_semantics")]
    pub semantics: SemanticsId,
}

fn default_semantics() -> SemanticsId {
    SemanticsId::DfQuad
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HistoryEntry {
    pub edit: ContestationEdit,
    pub diff: ContestationDiff,
}

/// Everything a client needs to draw a session.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SessionView {
    pub session_id: String,
    pub semantics: SemanticsId,
    pub qbaf: Qbaf,
    pub strengths: StrengthMap,
    /// Pro/con stance of every non-root argument.
    pub stances: BTreeMap<ArgumentId, Stance>,
    pub root_strength: f64,
    pub label: bool,
    pub history: Vec<HistoryEntry>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub transcript: Option<Transcript>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ContestResponse {
    pub diff: ContestationDiff,
    pub session: SessionView,
}

/// Starts a new session from the first `history_len` edits of another.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ForkRequest {
    pub history_len: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SemanticsInfo {
    pub id: SemanticsId,
    pub description: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SemanticsListing {
    pub semantics: Vec<SemanticsInfo>,
    pub default: SemanticsId,
    pub decision_threshold: f64,
}

impl Default for SemanticsListing {
    fn default() -> Self {
        Self {
            semantics: vec![
                SemanticsInfo {
                    id: SemanticsId::DfQuad,
                    description: "DF-QuAD: product aggregation of attackers and supporters, piecewise combination with the base score".into(),
                },
                SemanticsInfo {
                    id: SemanticsId::Qem,
                    description: "Quadratic energy: supporter minus attacker strength passed through a saturating influence".into(),
                },
            ],
            default: SemanticsId::DfQuad,
            decision_threshold: DECISION_THRESHOLD,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Health {
    pub status: String,
    pub backend: String,
    pub sessions: usize,
}

/// Body of every non-2xx response.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ErrorBody {
    pub error: String,
    pub message: String,
}
