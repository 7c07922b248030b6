//! Quantitative bipolar argumentation frameworks restricted to trees.
//!
//! A [`Qbaf`] is a set of arguments with base scores in `[0, 1]`, plus attack
//! and support relations oriented child → parent. Every non-root argument has
//! exactly one outgoing relation and the relation graph is a tree rooted at
//! the claim. [`Baf`] is the same structure before base scores are assigned.

use std::collections::{BTreeMap, HashMap, HashSet};
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Identifier of an argument, unique within one framework.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct ArgumentId(String);

impl ArgumentId {
    pub fn new(id: impl Into<String>) -> Self {
        Self(id.into())
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }
}

impl fmt::Display for ArgumentId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl From<&str> for ArgumentId {
    fn from(s: &str) -> Self {
        Self(s.to_owned())
    }
}

impl From<String> for ArgumentId {
    fn from(s: String) -> Self {
        Self(s)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Polarity {
    Attack,
    Support,
}

impl Polarity {
    pub fn as_str(self) -> &'static str {
        match self {
            Polarity::Attack => "attack",
            Polarity::Support => "support",
        }
    }
}

impl fmt::Display for Polarity {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Role {
    Root,
    Child,
}

/// Whether an argument pushes the root up (pro) or down (con).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Stance {
    Pro,
    Con,
}

impl fmt::Display for Stance {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Stance::Pro => "pro",
            Stance::Con => "con",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Argument {
    pub id: ArgumentId,
    pub text: String,
    pub base_score: f64,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Relation {
    pub source: ArgumentId,
    pub target: ArgumentId,
    pub polarity: Polarity,
}

impl Relation {
    pub fn new(source: impl Into<ArgumentId>, target: impl Into<ArgumentId>, polarity: Polarity) -> Self {
        Self {
            source: source.into(),
            target: target.into(),
            polarity,
        }
    }

    pub fn attack(source: impl Into<ArgumentId>, target: impl Into<ArgumentId>) -> Self {
        Self::new(source, target, Polarity::Attack)
    }

    pub fn support(source: impl Into<ArgumentId>, target: impl Into<ArgumentId>) -> Self {
        Self::new(source, target, Polarity::Support)
    }
}

/// A chain of relations from a start argument to an end argument.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Path {
    edges: Vec<Relation>,
}

impl Path {
    /// Builds a path, checking that consecutive edges chain.
    pub fn new(edges: Vec<Relation>) -> Option<Self> {
        if edges.is_empty() {
            return None;
        }
        let chained = edges.windows(2).all(|w| w[0].target == w[1].source);
        chained.then_some(Self { edges })
    }

    pub fn edges(&self) -> &[Relation] {
        &self.edges
    }

    pub fn len(&self) -> usize {
        self.edges.len()
    }

    pub fn is_empty(&self) -> bool {
        self.edges.is_empty()
    }

    pub fn start(&self) -> &ArgumentId {
        &self.edges[0].source
    }

    pub fn end(&self) -> &ArgumentId {
        &self.edges[self.edges.len() - 1].target
    }

    pub fn attack_count(&self) -> usize {
        self.edges.iter().filter(|e| e.polarity == Polarity::Attack).count()
    }
}

/// A single way in which a framework breaks the tree restriction or a type invariant.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Violation {
    UnknownRoot { root: ArgumentId },
    DuplicateArgument { id: ArgumentId },
    BaseScoreOutOfRange { id: ArgumentId },
    SelfRelation { id: ArgumentId },
    DuplicateRelation { source: ArgumentId, target: ArgumentId },
    UnknownEndpoint { source: ArgumentId, target: ArgumentId, missing: ArgumentId },
    RootHasOutgoing { root: ArgumentId, target: ArgumentId },
    MultipleOutgoing { id: ArgumentId, count: usize },
    MultipleRoots { id: ArgumentId },
    Cycle { id: ArgumentId },
    Disconnected { id: ArgumentId },
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Violation::UnknownRoot { root } => write!(f, "root {root} is not an argument"),
            Violation::DuplicateArgument { id } => write!(f, "duplicate argument id {id}"),
            Violation::BaseScoreOutOfRange { id } => write!(f, "base score of {id} outside [0, 1]"),
            Violation::SelfRelation { id } => write!(f, "self-relation on {id}"),
            Violation::DuplicateRelation { source, target } => {
                write!(f, "duplicate relation {source} -> {target}")
            }
            Violation::UnknownEndpoint { source, target, missing } => {
                write!(f, "relation {source} -> {target} names unknown argument {missing}")
            }
            Violation::RootHasOutgoing { root, target } => {
                write!(f, "path from root {root} (relation to {target})")
            }
            Violation::MultipleOutgoing { id, count } => {
                write!(f, "multiple outgoing relations from {id} ({count})")
            }
            Violation::MultipleRoots { id } => {
                write!(f, "multiple roots: {id} has no outgoing relation")
            }
            Violation::Cycle { id } => write!(f, "cyclic path through {id}"),
            Violation::Disconnected { id } => write!(f, "{id} has no path to the root"),
        }
    }
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum QbafError {
    #[error("unknown argument {0}")]
    UnknownArgument(ArgumentId),
    #[error("argument {0} is the root")]
    ArgumentIsRoot(ArgumentId),
    #[error("invalid framework: {}", join_violations(.0))]
    Invalid(Vec<Violation>),
}

fn join_violations(v: &[Violation]) -> String {
    v.iter().map(ToString::to_string).collect::<Vec<_>>().join("; ")
}

/// Structural checks shared by [`Baf`] and [`Qbaf`].
fn structural_violations<'a>(
    root: &ArgumentId,
    ids: impl Iterator<Item = &'a ArgumentId>,
    relations: &[Relation],
) -> Vec<Violation> {
    let mut violations = Vec::new();
    let mut known: HashSet<&ArgumentId> = HashSet::new();
    let mut order: Vec<&ArgumentId> = Vec::new();
    for id in ids {
        if !known.insert(id) {
            violations.push(Violation::DuplicateArgument { id: id.clone() });
        } else {
            order.push(id);
        }
    }
    if !known.contains(root) {
        violations.push(Violation::UnknownRoot { root: root.clone() });
    }

    let mut seen_pairs: HashSet<(&ArgumentId, &ArgumentId)> = HashSet::new();
    let mut outgoing: HashMap<&ArgumentId, Vec<&ArgumentId>> = HashMap::new();
    for rel in relations {
        if rel.source == rel.target {
            violations.push(Violation::SelfRelation { id: rel.source.clone() });
            continue;
        }
        if !seen_pairs.insert((&rel.source, &rel.target)) {
            violations.push(Violation::DuplicateRelation {
                source: rel.source.clone(),
                target: rel.target.clone(),
            });
            continue;
        }
        let mut dangling = false;
        for end in [&rel.source, &rel.target] {
            if !known.contains(end) {
                violations.push(Violation::UnknownEndpoint {
                    source: rel.source.clone(),
                    target: rel.target.clone(),
                    missing: end.clone(),
                });
                dangling = true;
            }
        }
        if dangling {
            continue;
        }
        if &rel.source == root {
            violations.push(Violation::RootHasOutgoing {
                root: root.clone(),
                target: rel.target.clone(),
            });
            continue;
        }
        outgoing.entry(&rel.source).or_default().push(&rel.target);
    }

    for id in &order {
        if *id == root {
            continue;
        }
        match outgoing.get(id).map(Vec::len).unwrap_or(0) {
            0 => violations.push(Violation::MultipleRoots { id: (*id).clone() }),
            1 => {}
            count => violations.push(Violation::MultipleOutgoing {
                id: (*id).clone(),
                count,
            }),
        }
    }

    // Follow the unique outgoing edge of each argument towards the root.
    // Arguments with several outgoing edges are already reported above.
    let next = |id: &ArgumentId| -> Option<&ArgumentId> {
        match outgoing.get(id) {
            Some(targets) if targets.len() == 1 => Some(targets[0]),
            _ => None,
        }
    };
    let mut cyclic: HashSet<&ArgumentId> = HashSet::new();
    for id in &order {
        if *id == root || outgoing.get(id).map(Vec::len).unwrap_or(0) != 1 {
            continue;
        }
        let mut visited: Vec<&ArgumentId> = vec![id];
        let mut cursor: &ArgumentId = id;
        loop {
            match next(cursor) {
                Some(t) if t == root => break,
                Some(t) => {
                    if let Some(pos) = visited.iter().position(|v| *v == t) {
                        for member in &visited[pos..] {
                            cyclic.insert(member);
                        }
                        if !cyclic.contains(id) {
                            violations.push(Violation::Disconnected { id: (*id).clone() });
                        }
                        break;
                    }
                    visited.push(t);
                    cursor = t;
                }
                None => {
                    violations.push(Violation::Disconnected { id: (*id).clone() });
                    break;
                }
            }
        }
    }
    for id in &order {
        if cyclic.contains(id) {
            violations.push(Violation::Cycle { id: (*id).clone() });
        }
    }
    violations
}

/// The child lists of every argument, in relation order.
fn children_index(relations: &[Relation]) -> HashMap<&ArgumentId, Vec<&Relation>> {
    let mut index: HashMap<&ArgumentId, Vec<&Relation>> = HashMap::new();
    for rel in relations {
        index.entry(&rel.target).or_default().push(rel);
    }
    index
}

/// A bipolar argumentation framework whose base scores are not yet assigned.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Baf {
    root: ArgumentId,
    arguments: Vec<BafArgument>,
    relations: Vec<Relation>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct BafArgument {
    pub id: ArgumentId,
    pub text: String,
}

impl Baf {
    pub fn new(root: ArgumentId, arguments: Vec<BafArgument>, relations: Vec<Relation>) -> Self {
        Self {
            root,
            arguments,
            relations,
        }
    }

    pub fn root(&self) -> &ArgumentId {
        &self.root
    }

    pub fn arguments(&self) -> &[BafArgument] {
        &self.arguments
    }

    pub fn relations(&self) -> &[Relation] {
        &self.relations
    }

    pub fn len(&self) -> usize {
        self.arguments.len()
    }

    pub fn is_empty(&self) -> bool {
        self.arguments.is_empty()
    }

    pub fn validate(&self) -> Result<(), Vec<Violation>> {
        let v = structural_violations(
            &self.root,
            self.arguments.iter().map(|a| &a.id),
            &self.relations,
        );
        if v.is_empty() {
            Ok(())
        } else {
            Err(v)
        }
    }

    /// The outgoing relation of `id`, i.e. the edge to its parent.
    pub fn parent_edge(&self, id: &ArgumentId) -> Option<&Relation> {
        self.relations.iter().find(|r| &r.source == id)
    }

    pub fn text(&self, id: &ArgumentId) -> Option<&str> {
        self.arguments
            .iter()
            .find(|a| &a.id == id)
            .map(|a| a.text.as_str())
    }

    /// Attaches base scores, producing a quantitative framework.
    pub fn with_base_scores(self, mut score: impl FnMut(&ArgumentId) -> f64) -> Qbaf {
        let arguments = self
            .arguments
            .into_iter()
            .map(|a| {
                let base_score = score(&a.id);
                Argument {
                    id: a.id,
                    text: a.text,
                    base_score,
                }
            })
            .collect();
        Qbaf {
            root: self.root,
            arguments,
            relations: self.relations,
        }
    }
}

/// A quantitative bipolar argumentation framework for a root claim.
///
/// Values are immutable once built; contestation produces edited copies.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Qbaf {
    root: ArgumentId,
    arguments: Vec<Argument>,
    relations: Vec<Relation>,
}

impl Qbaf {
    /// Assembles a framework without checking it. See [`Qbaf::validate`].
    pub fn from_parts(root: ArgumentId, arguments: Vec<Argument>, relations: Vec<Relation>) -> Self {
        Self {
            root,
            arguments,
            relations,
        }
    }

    /// Assembles a framework and rejects it unless it is a valid tree.
    pub fn try_new(
        root: ArgumentId,
        arguments: Vec<Argument>,
        relations: Vec<Relation>,
    ) -> Result<Self, QbafError> {
        let q = Self::from_parts(root, arguments, relations);
        q.ensure_valid()?;
        Ok(q)
    }

    pub fn root(&self) -> &ArgumentId {
        &self.root
    }

    pub fn arguments(&self) -> &[Argument] {
        &self.arguments
    }

    pub fn relations(&self) -> &[Relation] {
        &self.relations
    }

    pub fn len(&self) -> usize {
        self.arguments.len()
    }

    pub fn is_empty(&self) -> bool {
        self.arguments.is_empty()
    }

    pub fn into_parts(self) -> (ArgumentId, Vec<Argument>, Vec<Relation>) {
        (self.root, self.arguments, self.relations)
    }

    pub fn argument(&self, id: &ArgumentId) -> Option<&Argument> {
        self.arguments.iter().find(|a| &a.id == id)
    }

    pub fn contains(&self, id: &ArgumentId) -> bool {
        self.argument(id).is_some()
    }

    pub fn role(&self, id: &ArgumentId) -> Option<Role> {
        self.argument(id).map(|_| {
            if id == &self.root {
                Role::Root
            } else {
                Role::Child
            }
        })
    }

    /// Checks the tree restriction and every type invariant, returning all violations.
    pub fn validate(&self) -> Result<(), Vec<Violation>> {
        let mut v = Vec::new();
        for a in &self.arguments {
            if !(0.0..=1.0).contains(&a.base_score) {
                v.push(Violation::BaseScoreOutOfRange { id: a.id.clone() });
            }
        }
        v.extend(structural_violations(
            &self.root,
            self.arguments.iter().map(|a| &a.id),
            &self.relations,
        ));
        if v.is_empty() {
            Ok(())
        } else {
            Err(v)
        }
    }

    pub fn ensure_valid(&self) -> Result<(), QbafError> {
        self.validate().map_err(QbafError::Invalid)
    }

    fn require(&self, id: &ArgumentId) -> Result<(), QbafError> {
        if self.contains(id) {
            Ok(())
        } else {
            Err(QbafError::UnknownArgument(id.clone()))
        }
    }

    /// The single outgoing relation of a non-root argument.
    pub fn parent_edge(&self, id: &ArgumentId) -> Option<&Relation> {
        self.relations.iter().find(|r| &r.source == id)
    }

    /// The unique path from `id` to the root.
    pub fn path_to_root(&self, id: &ArgumentId) -> Result<Path, QbafError> {
        self.require(id)?;
        if id == &self.root {
            return Err(QbafError::ArgumentIsRoot(id.clone()));
        }
        let mut edges = Vec::new();
        let mut cursor = id;
        while cursor != &self.root {
            // A valid tree never needs more steps than it has arguments.
            if edges.len() > self.arguments.len() {
                self.ensure_valid()?;
            }
            let edge = match self.parent_edge(cursor) {
                Some(e) => e,
                None => {
                    self.ensure_valid()?;
                    return Err(QbafError::Invalid(vec![Violation::Disconnected {
                        id: cursor.clone(),
                    }]));
                }
            };
            edges.push(edge.clone());
            cursor = &edge.target;
        }
        Ok(Path { edges })
    }

    /// Pro iff the path to the root crosses an even number of attacks.
    pub fn classify(&self, id: &ArgumentId) -> Result<Stance, QbafError> {
        let path = self.path_to_root(id)?;
        Ok(if path.attack_count() % 2 == 0 {
            Stance::Pro
        } else {
            Stance::Con
        })
    }

    /// Stance of every non-root argument.
    pub fn stances(&self) -> Result<BTreeMap<ArgumentId, Stance>, QbafError> {
        self.arguments
            .iter()
            .filter(|a| a.id != self.root)
            .map(|a| Ok((a.id.clone(), self.classify(&a.id)?)))
            .collect()
    }

    fn children_with(&self, id: &ArgumentId, polarity: Polarity) -> Result<Vec<&ArgumentId>, QbafError> {
        self.require(id)?;
        Ok(self
            .relations
            .iter()
            .filter(|r| &r.target == id && r.polarity == polarity)
            .map(|r| &r.source)
            .collect())
    }

    /// Direct attackers of `id`, in relation order.
    pub fn attackers(&self, id: &ArgumentId) -> Result<Vec<&ArgumentId>, QbafError> {
        self.children_with(id, Polarity::Attack)
    }

    /// Direct supporters of `id`, in relation order.
    pub fn supporters(&self, id: &ArgumentId) -> Result<Vec<&ArgumentId>, QbafError> {
        self.children_with(id, Polarity::Support)
    }

    pub fn is_leaf(&self, id: &ArgumentId) -> bool {
        !self.relations.iter().any(|r| &r.target == id)
    }

    /// Argument ids ordered so that every child precedes its parent.
    ///
    /// Only meaningful for valid frameworks.
    pub fn post_order(&self) -> Vec<&ArgumentId> {
        let children = children_index(&self.relations);
        let mut out = Vec::with_capacity(self.arguments.len());
        let mut stack: Vec<(&ArgumentId, bool)> = vec![(&self.root, false)];
        while let Some((id, expanded)) = stack.pop() {
            if expanded {
                out.push(id);
                continue;
            }
            stack.push((id, true));
            if let Some(kids) = children.get(id) {
                for rel in kids.iter().rev() {
                    stack.push((&rel.source, false));
                }
            }
        }
        out
    }

    /// Depth of every argument (root = 0).
    pub fn depths(&self) -> HashMap<&ArgumentId, usize> {
        let children = children_index(&self.relations);
        let mut depths = HashMap::new();
        let mut queue = std::collections::VecDeque::from([(&self.root, 0usize)]);
        while let Some((id, d)) = queue.pop_front() {
            depths.insert(id, d);
            if let Some(kids) = children.get(id) {
                for rel in kids {
                    queue.push_back((&rel.source, d + 1));
                }
            }
        }
        depths
    }

    /// All arguments in the subtree rooted at `id`, including `id`.
    pub fn subtree(&self, id: &ArgumentId) -> Result<HashSet<ArgumentId>, QbafError> {
        self.require(id)?;
        let children = children_index(&self.relations);
        let mut out = HashSet::new();
        let mut stack = vec![id];
        while let Some(cur) = stack.pop() {
            if out.insert(cur.clone()) {
                if let Some(kids) = children.get(cur) {
                    stack.extend(kids.iter().map(|r| &r.source));
                }
            }
        }
        Ok(out)
    }

    /// Drops base scores.
    pub fn to_baf(&self) -> Baf {
        Baf {
            root: self.root.clone(),
            arguments: self
                .arguments
                .iter()
                .map(|a| BafArgument {
                    id: a.id.clone(),
                    text: a.text.clone(),
                })
                .collect(),
            relations: self.relations.clone(),
        }
    }
}
