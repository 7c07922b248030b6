//! Contestation sessions: a framework, its strengths and the edits that produced it.

use serde::{Deserialize, Serialize};

use qbaf_core::api::{HistoryEntry, SessionView};
use qbaf_core::backend::Transcript;
use qbaf_core::contestation::{apply_edit, replay, ContestError, ContestationDiff, ContestationEdit};
use qbaf_core::decision::decide;
use qbaf_core::qbaf::Qbaf;
use qbaf_core::semantics::{evaluate_with, SemanticsId, StrengthMap};

/// Immutable state of one session. Edits produce a new value.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Session {
    pub id: String,
    pub semantics: SemanticsId,
    pub initial: Qbaf,
    pub current: Qbaf,
    pub strengths: StrengthMap,
    pub history: Vec<HistoryEntry>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub transcript: Option<Transcript>,
}

impl Session {
    pub fn new(
        id: String,
        qbaf: Qbaf,
        semantics: SemanticsId,
        transcript: Option<Transcript>,
    ) -> Result<Self, ContestError> {
        qbaf.ensure_valid()?;
        let strengths = evaluate_with(&qbaf, semantics)?;
        Ok(Self {
            id,
            semantics,
            initial: qbaf.clone(),
            current: qbaf,
            strengths,
            history: Vec::new(),
            transcript,
        })
    }

    pub fn root_strength(&self) -> f64 {
        self.strengths.get(self.current.root()).expect("root evaluated")
    }

    pub fn contest(&self, edit: &ContestationEdit) -> Result<(Session, ContestationDiff), ContestError> {
        let (current, diff) = apply_edit(&self.current, edit, self.semantics)?;
        let strengths = evaluate_with(&current, self.semantics)?;
        let mut history = self.history.clone();
        history.push(HistoryEntry {
            edit: edit.clone(),
            diff: diff.clone(),
        });
        let next = Session {
            current,
            strengths,
            history,
            ..self.clone()
        };
        Ok((next, diff))
    }

    /// A new session holding the first `history_len` edits of this one.
    pub fn fork(&self, id: String, history_len: usize) -> Result<Session, ContestError> {
        if history_len > self.history.len() {
            return Err(ContestError::Malformed(format!(
                "history has {} edits, cannot keep {history_len}",
                self.history.len()
            )));
        }
        let kept = &self.history[..history_len];
        let (current, _) = replay(&self.initial, kept.iter().map(|h| &h.edit), self.semantics)?;
        let strengths = evaluate_with(&current, self.semantics)?;
        Ok(Session {
            id,
            semantics: self.semantics,
            initial: self.initial.clone(),
            current,
            strengths,
            history: kept.to_vec(),
            transcript: self.transcript.clone(),
        })
    }

    /// Whether replaying the history from the initial framework reproduces
    /// the current framework and strengths.
    pub fn replays_consistently(&self) -> bool {
        let Ok((current, diffs)) = replay(
            &self.initial,
            self.history.iter().map(|h| &h.edit),
            self.semantics,
        ) else {
            return false;
        };
        let Ok(strengths) = evaluate_with(&current, self.semantics) else {
            return false;
        };
        current == self.current
            && strengths == self.strengths
            && diffs.iter().zip(&self.history).all(|(d, h)| *d == h.diff)
    }

    pub fn view(&self) -> SessionView {
        let root_strength = self.root_strength();
        SessionView {
            session_id: self.id.clone(),
            semantics: self.semantics,
            qbaf: self.current.clone(),
            strengths: self.strengths.clone(),
            stances: self.current.stances().expect("session frameworks are valid"),
            root_strength,
            label: decide(root_strength),
            history: self.history.clone(),
            transcript: self.transcript.clone(),
        }
    }
}
