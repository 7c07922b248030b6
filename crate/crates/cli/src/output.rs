//! Plain-text rendering of verdicts, frameworks, diffs and property reports.

use std::fmt::Write as _;

use qbaf_core::contestation::{ContestationDiff, EditKind};
use qbaf_core::properties::PropertyReport;
use qbaf_core::qbaf::{ArgumentId, Polarity, Qbaf, Stance};
use qbaf_core::semantics::StrengthMap;

pub fn truth(label: bool) -> &'static str {
    if label {
        "True"
    } else {
        "False"
    }
}

/// The framework as an indented tree, claim first, supporters marked `+`
/// and attackers `-`.
pub fn framework(qbaf: &Qbaf, strengths: Option<&StrengthMap>) -> String {
    let mut out = String::new();
    let stances = qbaf.stances().unwrap_or_default();
    node(qbaf, strengths, &stances, qbaf.root(), 0, None, &mut out);
    out
}

fn node(
    qbaf: &Qbaf,
    strengths: Option<&StrengthMap>,
    stances: &std::collections::BTreeMap<ArgumentId, Stance>,
    id: &ArgumentId,
    depth: usize,
    polarity: Option<Polarity>,
    out: &mut String,
) {
    let arg = qbaf.argument(id).expect("node of this framework");
    let sign = match polarity {
        None => "",
        Some(Polarity::Support) => "+ ",
        Some(Polarity::Attack) => "- ",
    };
    let _ = write!(
        out,
        "{}{sign}[{id}] {}  (base {:.3}",
        "  ".repeat(depth),
        arg.text,
        arg.base_score
    );
    if let Some(s) = strengths.and_then(|m| m.get(id)) {
        let _ = write!(out, ", strength {s:.3}");
    }
    match stances.get(id) {
        Some(Stance::Pro) => out.push_str(", pro"),
        Some(Stance::Con) => out.push_str(", con"),
        None => {}
    }
    out.push_str(")\n");
    for rel in qbaf.relations().iter().filter(|r| &r.target == id) {
        node(qbaf, strengths, stances, &rel.source, depth + 1, Some(rel.polarity), out);
    }
}

/// One contest step. `old_score` is the edited argument's base score before
/// a score change.
pub fn diff(index: usize, d: &ContestationDiff, old_score: Option<f64>, tol: f64) -> String {
    let e = &d.edit;
    let what = match e.kind {
        EditKind::SetBaseScore => format!(
            "set_base_score {} {} -> {}",
            e.target,
            old_score.map(|s| s.to_string()).unwrap_or_else(|| "?".into()),
            e.new_score.map(|s| s.to_string()).unwrap_or_default()
        ),
        EditKind::AddArgument => match &e.new_argument {
            Some(n) => format!(
                "add_argument {} ({} of {}, base {})",
                e.target,
                n.polarity.as_str(),
                n.parent,
                n.base_score
            ),
            None => format!("add_argument {}", e.target),
        },
        EditKind::RemoveArgument => format!("remove_argument {}", e.target),
    };
    let consistency = if d.is_consistent(tol) {
        "consistent"
    } else {
        "INCONSISTENT"
    };
    let mut out = format!("edit {index}: {what}\n");
    let _ = writeln!(
        out,
        "  root strength {:.6} -> {:.6} ({}; predicted {}, {consistency})",
        d.before_root_strength,
        d.after_root_strength,
        d.observed_change.as_str(),
        d.predicted_direction.as_str()
    );
    let _ = writeln!(
        out,
        "  verdict {} -> {}{}",
        truth(d.before_label),
        truth(d.after_label),
        if d.label_flipped { " (flipped)" } else { "" }
    );
    out
}

pub fn property_report(r: &PropertyReport) -> String {
    let mut out = format!(
        "{}: {} trials per family, seed {}, {} inequalities\n",
        r.semantics,
        r.trials,
        r.seed,
        if r.strict { "strict and weak" } else { "weak" }
    );
    for f in &r.families {
        let _ = write!(
            out,
            "  {:<26} weak violations {:>5}",
            format!("{:?}", f.family),
            f.weak_violations
        );
        if r.strict {
            let _ = write!(
                out,
                "   strict checked {:>5}, violations {:>5}",
                f.strict_checked, f.strict_violations
            );
        }
        out.push('\n');
    }
    for c in &r.counterexamples {
        let _ = writeln!(out, "  counterexample ({:?}, trial {}): {}", c.family, c.trial, c.description);
    }
    if let Some(note) = &r.weak_only_note {
        let _ = writeln!(out, "  note: {note}");
    }
    let _ = writeln!(
        out,
        "  {}",
        if r.passed() {
            "PASS".to_owned()
        } else {
            format!("FAIL: {} violations", r.violations())
        }
    );
    out
}
