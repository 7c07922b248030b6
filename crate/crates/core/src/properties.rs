//! Randomised checks of monotonicity and contestability.
//!
//! Each family draws random trees and random qualifying edits, evaluates the
//! framework before and after, and compares the observed movement with what
//! the property allows. Weak inequalities tolerate [`PROPERTY_TOLERANCE`] of
//! floating-point noise. Strict inequalities (QEM only) are checked exactly
//! on interior instances: root strength in `(0, 1)` and an edit that really
//! changes the strength of the edited argument.

use rand::seq::IndexedRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::contestation::{edited, predict_direction, ContestationEdit, Direction};
use crate::qbaf::{ArgumentId, Polarity, Qbaf, Stance};
use crate::random::{random_qbaf, TreeShape};
use crate::semantics::{evaluate_with, SemanticsId};

/// Absolute tolerance for weak inequalities between strengths.
pub const PROPERTY_TOLERANCE: f64 = 1e-12;

const MAX_COUNTEREXAMPLES: usize = 10;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Family {
    /// Raising a direct supporter (attacker) never lowers (raises) its parent.
    BaseScoreMonotonicity,
    /// Adding a leaf supporter (attacker) never lowers (raises) its parent.
    RelationMonotonicity,
    /// Raising a pro (con) argument never lowers (raises) the root.
    BaseScoreContestability,
    /// Adding a pro (con) argument never lowers (raises) the root.
    RelationContestability,
    /// A new leaf with base score zero changes no strength.
    ZeroLeafNeutrality,
}

impl Family {
    pub const ALL: [Family; 5] = [
        Family::BaseScoreMonotonicity,
        Family::RelationMonotonicity,
        Family::BaseScoreContestability,
        Family::RelationContestability,
        Family::ZeroLeafNeutrality,
    ];
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FamilyReport {
    pub family: Family,
    pub trials: usize,
    pub weak_violations: usize,
    /// Trials on which strictness was required.
    pub strict_checked: usize,
    pub strict_violations: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Counterexample {
    pub family: Family,
    pub trial: usize,
    pub description: String,
    pub qbaf: Qbaf,
    pub edit: ContestationEdit,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PropertyReport {
    pub semantics: SemanticsId,
    pub trials: usize,
    pub seed: u64,
    pub strict: bool,
    pub families: Vec<FamilyReport>,
    pub counterexamples: Vec<Counterexample>,
    /// Present when the semantics satisfies the contestability properties only weakly.
    pub weak_only_note: Option<String>,
}

impl PropertyReport {
    pub fn violations(&self) -> usize {
        self.families
            .iter()
            .map(|f| f.weak_violations + f.strict_violations)
            .sum()
    }

    pub fn passed(&self) -> bool {
        self.violations() == 0
    }

    pub fn family(&self, family: Family) -> Option<&FamilyReport> {
        self.families.iter().find(|f| f.family == family)
    }
}

/// Shape of the random trees used by [`check_properties`].
pub const CHECK_SHAPE: TreeShape = TreeShape {
    max_depth: 4,
    max_children: 3,
    max_nodes: usize::MAX,
};

struct Outcome {
    weak_ok: bool,
    /// `Some(ok)` when strictness was required on this trial.
    strict: Option<bool>,
    description: String,
}

fn pick_non_root<'a, R: Rng>(rng: &mut R, q: &'a Qbaf) -> &'a ArgumentId {
    let candidates: Vec<&ArgumentId> = q
        .arguments()
        .iter()
        .map(|a| &a.id)
        .filter(|id| *id != q.root())
        .collect();
    candidates.choose(rng).copied().expect("random trees have a child")
}

fn fresh_id(q: &Qbaf) -> ArgumentId {
    ArgumentId::new(format!("n{}", q.len()))
}

fn raised_score<R: Rng>(rng: &mut R, old: f64) -> f64 {
    // strictly above `old`, at most 1
    let span = 1.0 - old;
    let new = old + span * rng.random_range(0.05..=1.0);
    if new > old {
        new.min(1.0)
    } else {
        1.0
    }
}

fn random_polarity<R: Rng>(rng: &mut R) -> Polarity {
    if rng.random::<bool>() {
        Polarity::Support
    } else {
        Polarity::Attack
    }
}

fn strength(q: &Qbaf, sem: SemanticsId, id: &ArgumentId) -> f64 {
    evaluate_with(q, sem)
        .expect("valid framework")
        .get(id)
        .expect("known argument")
}

fn local_direction(polarity: Polarity) -> Direction {
    match polarity {
        Polarity::Support => Direction::Nondecrease,
        Polarity::Attack => Direction::Nonincrease,
    }
}

fn run_trial<R: Rng>(
    rng: &mut R,
    family: Family,
    semantics: SemanticsId,
    strict: bool,
) -> (Qbaf, ContestationEdit, Outcome) {
    let q = random_qbaf(rng, CHECK_SHAPE);
    match family {
        Family::BaseScoreMonotonicity => {
            let beta = pick_non_root(rng, &q).clone();
            let edge = q.parent_edge(&beta).expect("non-root").clone();
            let old = q.argument(&beta).expect("known").base_score;
            let edit = ContestationEdit::set_base_score(beta, raised_score(rng, old));
            let after = edited(&q, &edit).expect("valid edit");
            let (b, a) = (
                strength(&q, semantics, &edge.target),
                strength(&after, semantics, &edge.target),
            );
            let weak_ok = local_direction(edge.polarity).admits(b, a, PROPERTY_TOLERANCE);
            let description = format!(
                "{} {} of {}: parent strength {b} -> {a}",
                edit.target, edge.polarity, edge.target
            );
            (q, edit, Outcome { weak_ok, strict: None, description })
        }
        Family::RelationMonotonicity => {
            let parents: Vec<&ArgumentId> = q.arguments().iter().map(|a| &a.id).collect();
            let alpha = (*parents.choose(rng).expect("non-empty")).clone();
            let polarity = random_polarity(rng);
            let edit = ContestationEdit::add_argument(
                fresh_id(&q),
                alpha.clone(),
                polarity,
                rng.random::<f64>(),
                "added",
            );
            let after = edited(&q, &edit).expect("valid edit");
            let (b, a) = (strength(&q, semantics, &alpha), strength(&after, semantics, &alpha));
            let weak_ok = local_direction(polarity).admits(b, a, PROPERTY_TOLERANCE);
            let description = format!("added {polarity} leaf to {alpha}: strength {b} -> {a}");
            (q, edit, Outcome { weak_ok, strict: None, description })
        }
        Family::BaseScoreContestability => {
            let beta = pick_non_root(rng, &q).clone();
            let old = q.argument(&beta).expect("known").base_score;
            let edit = ContestationEdit::set_base_score(beta.clone(), raised_score(rng, old));
            let stance = q.classify(&beta).expect("non-root");
            let predicted = predict_direction(&q, &edit).expect("valid edit");
            debug_assert_eq!(
                predicted,
                if stance == Stance::Pro {
                    Direction::Nondecrease
                } else {
                    Direction::Nonincrease
                }
            );
            let after = edited(&q, &edit).expect("valid edit");
            let root = q.root();
            let before_map = evaluate_with(&q, semantics).expect("valid");
            let after_map = evaluate_with(&after, semantics).expect("valid");
            let (b, a) = (before_map.get(root).unwrap(), after_map.get(root).unwrap());
            let weak_ok = predicted.admits(b, a, PROPERTY_TOLERANCE);
            let interior = b > 0.0 && b < 1.0;
            let moved = before_map.get(&beta) != after_map.get(&beta);
            let strict_required = strict && interior && moved;
            let strict_ok = strict_required.then_some(match stance {
                Stance::Pro => a > b,
                Stance::Con => a < b,
            });
            let description = format!("raise {stance} argument {beta}: root {b} -> {a}");
            (q, edit, Outcome { weak_ok, strict: strict_ok, description })
        }
        Family::RelationContestability => {
            let parents: Vec<&ArgumentId> = q.arguments().iter().map(|a| &a.id).collect();
            let alpha = (*parents.choose(rng).expect("non-empty")).clone();
            let polarity = random_polarity(rng);
            let score = rng.random::<f64>();
            let edit = ContestationEdit::add_argument(fresh_id(&q), alpha, polarity, score, "added");
            let predicted = predict_direction(&q, &edit).expect("valid edit");
            let after = edited(&q, &edit).expect("valid edit");
            let (b, a) = (
                strength(&q, semantics, q.root()),
                strength(&after, semantics, q.root()),
            );
            let weak_ok = predicted.admits(b, a, PROPERTY_TOLERANCE);
            let strict_required = strict && b > 0.0 && b < 1.0 && score > 0.0;
            let strict_ok = strict_required.then_some(match predicted {
                Direction::Nondecrease => a > b,
                Direction::Nonincrease => a < b,
                Direction::None => true,
            });
            let description = format!(
                "add {polarity} leaf ({predicted:?}) to {}: root {b} -> {a}",
                edit.new_argument.as_ref().map(|n| n.parent.as_str()).unwrap_or("")
            );
            (q, edit, Outcome { weak_ok, strict: strict_ok, description })
        }
        Family::ZeroLeafNeutrality => {
            let parents: Vec<&ArgumentId> = q.arguments().iter().map(|a| &a.id).collect();
            let alpha = (*parents.choose(rng).expect("non-empty")).clone();
            let polarity = random_polarity(rng);
            let edit = ContestationEdit::add_argument(fresh_id(&q), alpha, polarity, 0.0, "added");
            let after = edited(&q, &edit).expect("valid edit");
            let before_map = evaluate_with(&q, semantics).expect("valid");
            let after_map = evaluate_with(&after, semantics).expect("valid");
            let changed: Vec<String> = before_map
                .iter()
                .filter(|(id, v)| after_map.get(id) != Some(*v))
                .map(|(id, _)| id.to_string())
                .collect();
            let description = format!("zero leaf changed strengths of {changed:?}");
            (
                q,
                edit,
                Outcome {
                    weak_ok: changed.is_empty(),
                    strict: None,
                    description,
                },
            )
        }
    }
}

/// Runs `trials` random trials of every property family.
///
/// DF-QuAD is held to the weak inequalities. QEM is additionally held to
/// strict inequalities on interior instances.
pub fn check_properties(semantics: SemanticsId, trials: usize, seed: u64) -> PropertyReport {
    check_families(semantics, &Family::ALL, trials, seed)
}

/// Like [`check_properties`] but limited to `selected`. Each family draws
/// from its own stream, so its results do not depend on the selection.
pub fn check_families(
    semantics: SemanticsId,
    selected: &[Family],
    trials: usize,
    seed: u64,
) -> PropertyReport {
    let strict = semantics == SemanticsId::Qem;
    let mut families = Vec::new();
    let mut counterexamples = Vec::new();
    for (offset, family) in Family::ALL.into_iter().enumerate() {
        if !selected.contains(&family) {
            continue;
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed.wrapping_add(offset as u64));
        let mut report = FamilyReport {
            family,
            trials,
            weak_violations: 0,
            strict_checked: 0,
            strict_violations: 0,
        };
        for trial in 0..trials {
            let (q, edit, outcome) = run_trial(&mut rng, family, semantics, strict);
            let mut failed = None;
            if !outcome.weak_ok {
                report.weak_violations += 1;
                failed = Some("weak");
            }
            if let Some(ok) = outcome.strict {
                report.strict_checked += 1;
                if !ok {
                    report.strict_violations += 1;
                    failed.get_or_insert("strict");
                }
            }
            if let Some(kind) = failed {
                if counterexamples.len() < MAX_COUNTEREXAMPLES {
                    counterexamples.push(Counterexample {
                        family,
                        trial,
                        description: format!("{kind}: {}", outcome.description),
                        qbaf: q,
                        edit,
                    });
                }
            }
        }
        families.push(report);
    }
    let weak_only_note = (semantics == SemanticsId::DfQuad).then(|| {
        let w = dfquad_saturation_witness();
        format!(
            "df-quad satisfies contestability only weakly: raising pro argument {} leaves the root at {} because its supporters already aggregate to 1",
            w.edit.target, w.after_root
        )
    });
    PropertyReport {
        semantics,
        trials,
        seed,
        strict,
        families,
        counterexamples,
        weak_only_note,
    }
}

/// A framework and edit on which a pro argument rises but the root stays put.
#[derive(Debug, Clone, PartialEq)]
pub struct SaturationWitness {
    pub qbaf: Qbaf,
    pub edit: ContestationEdit,
    pub before_root: f64,
    pub after_root: f64,
}

/// Root 0.5 with a fully confident supporter and attacker: both aggregates
/// are saturated at 1, so raising a second supporter changes nothing even
/// though the root strength is not 1.
pub fn dfquad_saturation_witness() -> SaturationWitness {
    use crate::qbaf::{Argument, Relation};
    let arg = |id: &str, s: f64| Argument {
        id: id.into(),
        text: id.into(),
        base_score: s,
    };
    let qbaf = Qbaf::try_new(
        "claim".into(),
        vec![
            arg("claim", 0.5),
            arg("sure_support", 1.0),
            arg("sure_attack", 1.0),
            arg("weak_support", 0.2),
        ],
        vec![
            Relation::support("sure_support", "claim"),
            Relation::attack("sure_attack", "claim"),
            Relation::support("weak_support", "claim"),
        ],
    )
    .expect("witness is a valid tree");
    let edit = ContestationEdit::set_base_score("weak_support", 0.6);
    let after = edited(&qbaf, &edit).expect("valid edit");
    let before_root = strength(&qbaf, SemanticsId::DfQuad, qbaf.root());
    let after_root = strength(&after, SemanticsId::DfQuad, after.root());
    SaturationWitness {
        qbaf,
        edit,
        before_root,
        after_root,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn small_runs_pass() {
        for sem in SemanticsId::ALL {
            let report = check_properties(sem, 200, 11);
            assert!(report.passed(), "{:?}", report.counterexamples);
            assert_eq!(report.families.len(), Family::ALL.len());
        }
    }

    #[test]
    fn qem_checks_strictness() {
        let report = check_properties(SemanticsId::Qem, 200, 5);
        assert!(report.family(Family::BaseScoreContestability).unwrap().strict_checked > 100);
        assert!(report.weak_only_note.is_none());
    }

    #[test]
    fn dfquad_witness_is_an_equality() {
        let w = dfquad_saturation_witness();
        assert_eq!(w.before_root, 0.5);
        assert_eq!(w.after_root, w.before_root);
        assert_eq!(w.qbaf.classify(&w.edit.target).unwrap(), Stance::Pro);
        assert!(check_properties(SemanticsId::DfQuad, 1, 0).weak_only_note.is_some());
    }

    #[test]
    fn family_selection_is_independent() {
        let all = check_properties(SemanticsId::Qem, 50, 3);
        let one = check_families(SemanticsId::Qem, &[Family::RelationContestability], 50, 3);
        assert_eq!(one.families.len(), 1);
        assert_eq!(
            one.families[0],
            *all.family(Family::RelationContestability).unwrap()
        );
    }
}
