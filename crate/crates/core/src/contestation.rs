//! Human edits to a framework and their measured effect on the verdict.
//!
//! Every edit is applied to a copy. The returned diff carries both
//! evaluations, the label before and after, and the direction in which the
//! root strength is guaranteed to move (if any).

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::decision::decide;
use crate::qbaf::{Argument, ArgumentId, Polarity, Qbaf, QbafError, Relation, Stance};
use crate::semantics::{evaluate_with, SemanticsError, SemanticsId, StrengthMap};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EditKind {
    SetBaseScore,
    AddArgument,
    RemoveArgument,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NewArgument {
    pub text: String,
    pub polarity: Polarity,
    pub base_score: f64,
    pub parent: ArgumentId,
}

/// One user intervention.
///
/// `target` is the argument whose score changes, the id given to a new
/// argument, or the root of the subtree to remove.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ContestationEdit {
    pub kind: EditKind,
    pub target: ArgumentId,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub new_score: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub new_argument: Option<NewArgument>,
}

impl ContestationEdit {
    pub fn set_base_score(target: impl Into<ArgumentId>, score: f64) -> Self {
        Self {
            kind: EditKind::SetBaseScore,
            target: target.into(),
            new_score: Some(score),
            new_argument: None,
        }
    }

    pub fn add_argument(
        id: impl Into<ArgumentId>,
        parent: impl Into<ArgumentId>,
        polarity: Polarity,
        base_score: f64,
        text: impl Into<String>,
    ) -> Self {
        Self {
            kind: EditKind::AddArgument,
            target: id.into(),
            new_score: None,
            new_argument: Some(NewArgument {
                text: text.into(),
                polarity,
                base_score,
                parent: parent.into(),
            }),
        }
    }

    pub fn remove_argument(target: impl Into<ArgumentId>) -> Self {
        Self {
            kind: EditKind::RemoveArgument,
            target: target.into(),
            new_score: None,
            new_argument: None,
        }
    }

    /// Checks that the fields present match the kind.
    pub fn check_shape(&self) -> Result<(), ContestError> {
        let ok = match self.kind {
            EditKind::SetBaseScore => self.new_score.is_some() && self.new_argument.is_none(),
            EditKind::AddArgument => self.new_argument.is_some() && self.new_score.is_none(),
            EditKind::RemoveArgument => self.new_score.is_none() && self.new_argument.is_none(),
        };
        if ok {
            Ok(())
        } else {
            Err(ContestError::Malformed(format!(
                "fields do not match edit kind {:?}",
                self.kind
            )))
        }
    }
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ContestError {
    #[error("malformed edit: {0}")]
    Malformed(String),
    #[error("unknown target {0}")]
    UnknownTarget(ArgumentId),
    #[error("unknown parent {0}")]
    UnknownParent(ArgumentId),
    #[error("argument id {0} already exists")]
    DuplicateId(ArgumentId),
    #[error("score {0} outside [0, 1]")]
    ScoreOutOfRange(f64),
    #[error("cannot remove the root")]
    WouldRemoveRoot,
    #[error(transparent)]
    Framework(#[from] QbafError),
    #[error(transparent)]
    Semantics(#[from] SemanticsError),
}

/// Guaranteed direction of the root strength after an edit.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Direction {
    Nondecrease,
    Nonincrease,
    None,
}

impl Direction {
    pub fn as_str(self) -> &'static str {
        match self {
            Direction::Nondecrease => "nondecrease",
            Direction::Nonincrease => "nonincrease",
            Direction::None => "none",
        }
    }

    /// Whether `before → after` is consistent with the prediction, within `tol`.
    pub fn admits(self, before: f64, after: f64, tol: f64) -> bool {
        match self {
            Direction::Nondecrease => after >= before - tol,
            Direction::Nonincrease => after <= before + tol,
            Direction::None => true,
        }
    }
}

/// Observed movement of the root strength.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Change {
    Increase,
    Decrease,
    Unchanged,
}

impl Change {
    pub fn as_str(self) -> &'static str {
        match self {
            Change::Increase => "increase",
            Change::Decrease => "decrease",
            Change::Unchanged => "unchanged",
        }
    }

    pub fn between(before: f64, after: f64) -> Self {
        if after > before {
            Change::Increase
        } else if after < before {
            Change::Decrease
        } else {
            Change::Unchanged
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StrengthDelta {
    pub before: Option<f64>,
    pub after: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ContestationDiff {
    pub edit: ContestationEdit,
    pub semantics: SemanticsId,
    pub before_root_strength: f64,
    pub after_root_strength: f64,
    pub before_label: bool,
    pub after_label: bool,
    pub label_flipped: bool,
    pub predicted_direction: Direction,
    pub observed_change: Change,
    pub deltas: BTreeMap<ArgumentId, StrengthDelta>,
}

impl ContestationDiff {
    /// Whether the observed change agrees with the prediction.
    pub fn is_consistent(&self, tol: f64) -> bool {
        self.predicted_direction
            .admits(self.before_root_strength, self.after_root_strength, tol)
    }
}

fn check_score(score: f64) -> Result<f64, ContestError> {
    if score.is_nan() || !(0.0..=1.0).contains(&score) {
        Err(ContestError::ScoreOutOfRange(score))
    } else {
        Ok(score)
    }
}

fn direction_for(stance: Stance, old: f64, new: f64) -> Direction {
    let up = match new.partial_cmp(&old) {
        Some(std::cmp::Ordering::Greater) => true,
        Some(std::cmp::Ordering::Less) => false,
        _ => return Direction::None,
    };
    match (stance, up) {
        (Stance::Pro, true) | (Stance::Con, false) => Direction::Nondecrease,
        (Stance::Pro, false) | (Stance::Con, true) => Direction::Nonincrease,
    }
}

/// Predicts how the root strength moves under `edit`.
///
/// Raising a pro argument (or lowering a con one) cannot lower the root, and
/// vice versa. Added arguments are classified in the edited framework.
/// Changing the root's own base score is monotone in the same sense as a pro
/// argument. Removals carry no guarantee.
pub fn predict_direction(qbaf: &Qbaf, edit: &ContestationEdit) -> Result<Direction, ContestError> {
    edit.check_shape()?;
    match edit.kind {
        EditKind::SetBaseScore => {
            let new = check_score(edit.new_score.unwrap_or_default())?;
            let arg = qbaf
                .argument(&edit.target)
                .ok_or_else(|| ContestError::UnknownTarget(edit.target.clone()))?;
            let stance = if &edit.target == qbaf.root() {
                Stance::Pro
            } else {
                qbaf.classify(&edit.target)?
            };
            Ok(direction_for(stance, arg.base_score, new))
        }
        EditKind::AddArgument => {
            let new_arg = edit.new_argument.as_ref().expect("shape checked");
            check_score(new_arg.base_score)?;
            if qbaf.contains(&edit.target) {
                return Err(ContestError::DuplicateId(edit.target.clone()));
            }
            if !qbaf.contains(&new_arg.parent) {
                return Err(ContestError::UnknownParent(new_arg.parent.clone()));
            }
            let parent_attacks = if &new_arg.parent == qbaf.root() {
                0
            } else {
                qbaf.path_to_root(&new_arg.parent)?.attack_count()
            };
            let attacks = parent_attacks + usize::from(new_arg.polarity == Polarity::Attack);
            Ok(if attacks % 2 == 0 {
                Direction::Nondecrease
            } else {
                Direction::Nonincrease
            })
        }
        EditKind::RemoveArgument => {
            if &edit.target == qbaf.root() {
                return Err(ContestError::WouldRemoveRoot);
            }
            if !qbaf.contains(&edit.target) {
                return Err(ContestError::UnknownTarget(edit.target.clone()));
            }
            Ok(Direction::None)
        }
    }
}

/// Builds the edited framework without evaluating it.
pub fn edited(qbaf: &Qbaf, edit: &ContestationEdit) -> Result<Qbaf, ContestError> {
    edit.check_shape()?;
    qbaf.ensure_valid()?;
    let (root, mut arguments, mut relations) = qbaf.clone().into_parts();
    match edit.kind {
        EditKind::SetBaseScore => {
            let new = check_score(edit.new_score.unwrap_or_default())?;
            let arg = arguments
                .iter_mut()
                .find(|a| a.id == edit.target)
                .ok_or_else(|| ContestError::UnknownTarget(edit.target.clone()))?;
            arg.base_score = new;
        }
        EditKind::AddArgument => {
            let new_arg = edit.new_argument.as_ref().expect("shape checked");
            check_score(new_arg.base_score)?;
            if qbaf.contains(&edit.target) {
                return Err(ContestError::DuplicateId(edit.target.clone()));
            }
            if !qbaf.contains(&new_arg.parent) {
                return Err(ContestError::UnknownParent(new_arg.parent.clone()));
            }
            arguments.push(Argument {
                id: edit.target.clone(),
                text: new_arg.text.clone(),
                base_score: new_arg.base_score,
            });
            relations.push(Relation::new(
                edit.target.clone(),
                new_arg.parent.clone(),
                new_arg.polarity,
            ));
        }
        EditKind::RemoveArgument => {
            if edit.target == root {
                return Err(ContestError::WouldRemoveRoot);
            }
            if !qbaf.contains(&edit.target) {
                return Err(ContestError::UnknownTarget(edit.target.clone()));
            }
            let doomed = qbaf.subtree(&edit.target)?;
            arguments.retain(|a| !doomed.contains(&a.id));
            relations.retain(|r| !doomed.contains(&r.source));
        }
    }
    let out = Qbaf::from_parts(root, arguments, relations);
    out.ensure_valid()?;
    Ok(out)
}

fn deltas(before: &StrengthMap, after: &StrengthMap) -> BTreeMap<ArgumentId, StrengthDelta> {
    let mut out: BTreeMap<ArgumentId, StrengthDelta> = BTreeMap::new();
    for (id, v) in before.iter() {
        out.insert(
            id.clone(),
            StrengthDelta {
                before: Some(v),
                after: after.get(id),
            },
        );
    }
    for (id, v) in after.iter() {
        out.entry(id.clone()).or_insert(StrengthDelta {
            before: None,
            after: Some(v),
        });
    }
    out
}

/// Applies `edit` to a copy of `qbaf` and reports its effect under `semantics`.
pub fn apply_edit(
    qbaf: &Qbaf,
    edit: &ContestationEdit,
    semantics: SemanticsId,
) -> Result<(Qbaf, ContestationDiff), ContestError> {
    let predicted_direction = predict_direction(qbaf, edit)?;
    let after_qbaf = edited(qbaf, edit)?;
    let before = evaluate_with(qbaf, semantics)?;
    let after = evaluate_with(&after_qbaf, semantics)?;
    let root = qbaf.root();
    let before_root = before.get(root).expect("root evaluated");
    let after_root = after.get(root).expect("root evaluated");
    let diff = ContestationDiff {
        edit: edit.clone(),
        semantics,
        before_root_strength: before_root,
        after_root_strength: after_root,
        before_label: decide(before_root),
        after_label: decide(after_root),
        label_flipped: decide(before_root) != decide(after_root),
        predicted_direction,
        observed_change: Change::between(before_root, after_root),
        deltas: deltas(&before, &after),
    };
    Ok((after_qbaf, diff))
}

/// Replays a sequence of edits from an initial framework.
pub fn replay<'a>(
    initial: &Qbaf,
    edits: impl IntoIterator<Item = &'a ContestationEdit>,
    semantics: SemanticsId,
) -> Result<(Qbaf, Vec<ContestationDiff>), ContestError> {
    let mut current = initial.clone();
    let mut diffs = Vec::new();
    for edit in edits {
        let (next, diff) = apply_edit(&current, edit, semantics)?;
        current = next;
        diffs.push(diff);
    }
    Ok((current, diffs))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn arg(id: &str, s: f64) -> Argument {
        Argument {
            id: id.into(),
            text: id.into(),
            base_score: s,
        }
    }

    /// Root 0.5, supporter 0.6, attacker 0.9: false under DF-QuAD.
    fn contested() -> Qbaf {
        Qbaf::try_new(
            "claim".into(),
            vec![arg("claim", 0.5), arg("pro", 0.6), arg("con", 0.9)],
            vec![Relation::support("pro", "claim"), Relation::attack("con", "claim")],
        )
        .unwrap()
    }

    #[test]
    fn lowering_attacker_flips_label() {
        let q = contested();
        let edit = ContestationEdit::set_base_score("con", 0.5);
        let (after, diff) = apply_edit(&q, &edit, SemanticsId::DfQuad).unwrap();
        assert!((diff.before_root_strength - 0.35).abs() < 1e-12);
        assert!((diff.after_root_strength - 0.55).abs() < 1e-12);
        assert!(!diff.before_label && diff.after_label && diff.label_flipped);
        assert_eq!(diff.predicted_direction, Direction::Nondecrease);
        assert_eq!(diff.observed_change, Change::Increase);
        assert!(diff.is_consistent(0.0));
        assert_eq!(after.argument(&"con".into()).unwrap().base_score, 0.5);
        // input untouched
        assert_eq!(q.argument(&"con".into()).unwrap().base_score, 0.9);
    }

    #[test]
    fn zero_leaf_changes_nothing() {
        let q = contested();
        for sem in SemanticsId::ALL {
            let edit = ContestationEdit::add_argument("z", "pro", Polarity::Support, 0.0, "z");
            let (_, diff) = apply_edit(&q, &edit, sem).unwrap();
            for (id, d) in &diff.deltas {
                if id.as_str() != "z" {
                    assert_eq!(d.before, d.after, "{id} under {sem}");
                }
            }
        }
    }

    #[test]
    fn remove_then_readd_restores_strengths() {
        let q = contested();
        let remove = ContestationEdit::remove_argument("con");
        let readd = ContestationEdit::add_argument("con", "claim", Polarity::Attack, 0.9, "con");
        let (back, _) = replay(&q, [&remove, &readd], SemanticsId::DfQuad).unwrap();
        let a = evaluate_with(&q, SemanticsId::DfQuad).unwrap();
        let b = evaluate_with(&back, SemanticsId::DfQuad).unwrap();
        for (id, v) in a.iter() {
            assert!((v - b.get(id).unwrap()).abs() <= 1e-12);
        }
    }

    #[test]
    fn remove_drops_whole_subtree() {
        let q = Qbaf::try_new(
            "r".into(),
            vec![arg("r", 0.5), arg("a", 0.5), arg("b", 0.5), arg("c", 0.5)],
            vec![
                Relation::attack("a", "r"),
                Relation::support("b", "a"),
                Relation::attack("c", "b"),
            ],
        )
        .unwrap();
        let (after, diff) = apply_edit(&q, &ContestationEdit::remove_argument("a"), SemanticsId::Qem).unwrap();
        assert_eq!(after.len(), 1);
        assert_eq!(diff.predicted_direction, Direction::None);
        assert_eq!(diff.deltas[&ArgumentId::from("c")].after, None);
    }

    #[test]
    fn predictions_follow_parity() {
        let q = Qbaf::try_new(
            "r".into(),
            vec![arg("r", 0.5), arg("s", 0.5), arg("ss", 0.5), arg("a", 0.5), arg("g", 0.5)],
            vec![
                Relation::support("s", "r"),
                Relation::support("ss", "s"),
                Relation::attack("a", "r"),
                Relation::attack("g", "a"),
            ],
        )
        .unwrap();
        let p = |e: ContestationEdit| predict_direction(&q, &e).unwrap();
        assert_eq!(p(ContestationEdit::set_base_score("ss", 0.9)), Direction::Nondecrease);
        assert_eq!(p(ContestationEdit::set_base_score("ss", 0.1)), Direction::Nonincrease);
        assert_eq!(p(ContestationEdit::set_base_score("a", 0.1)), Direction::Nondecrease);
        assert_eq!(p(ContestationEdit::set_base_score("a", 0.5)), Direction::None);
        assert_eq!(p(ContestationEdit::set_base_score("r", 0.7)), Direction::Nondecrease);
        // attacker of an attacker is pro
        assert_eq!(
            p(ContestationEdit::add_argument("d", "a", Polarity::Attack, 0.4, "d")),
            Direction::Nondecrease
        );
        assert_eq!(
            p(ContestationEdit::add_argument("d", "g", Polarity::Attack, 0.4, "d")),
            Direction::Nonincrease
        );
        assert_eq!(p(ContestationEdit::remove_argument("s")), Direction::None);
    }

    #[test]
    fn edit_errors() {
        let q = contested();
        let sem = SemanticsId::DfQuad;
        assert_eq!(
            apply_edit(&q, &ContestationEdit::set_base_score("nope", 0.2), sem).unwrap_err(),
            ContestError::UnknownTarget("nope".into())
        );
        assert_eq!(
            apply_edit(&q, &ContestationEdit::set_base_score("pro", 1.2), sem).unwrap_err(),
            ContestError::ScoreOutOfRange(1.2)
        );
        assert_eq!(
            apply_edit(&q, &ContestationEdit::remove_argument("claim"), sem).unwrap_err(),
            ContestError::WouldRemoveRoot
        );
        assert_eq!(
            apply_edit(
                &q,
                &ContestationEdit::add_argument("pro", "claim", Polarity::Support, 0.2, "x"),
                sem
            )
            .unwrap_err(),
            ContestError::DuplicateId("pro".into())
        );
        assert_eq!(
            apply_edit(
                &q,
                &ContestationEdit::add_argument("x", "ghost", Polarity::Support, 0.2, "x"),
                sem
            )
            .unwrap_err(),
            ContestError::UnknownParent("ghost".into())
        );
        let mut bad = ContestationEdit::set_base_score("pro", 0.2);
        bad.new_score = None;
        assert!(matches!(apply_edit(&q, &bad, sem), Err(ContestError::Malformed(_))));
    }

    #[test]
    fn edit_wire_format() {
        let e: ContestationEdit =
            serde_json::from_str(r#"{"kind":"set_base_score","target":"con","new_score":0.5}"#).unwrap();
        assert_eq!(e, ContestationEdit::set_base_score("con", 0.5));
        let e: ContestationEdit = serde_json::from_str(
            r#"{"kind":"add_argument","target":"d","new_argument":{"text":"t","polarity":"attack","base_score":0.3,"parent":"con"}}"#,
        )
        .unwrap();
        assert_eq!(e.new_argument.unwrap().parent, ArgumentId::from("con"));
    }
}
