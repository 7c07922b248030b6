//! Gradual semantics over tree-shaped frameworks.
//!
//! Strengths are computed in one post-order pass: leaves keep their base
//! score, and each inner argument combines its base score with the strengths
//! of its attackers and supporters.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;
use std::sync::Arc;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::qbaf::{ArgumentId, Polarity, Qbaf, Violation};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SemanticsError {
    #[error("value {0} is outside [0, 1]")]
    OutOfRange(f64),
    #[error("value {0} is not finite")]
    NonFinite(f64),
    #[error("invalid framework: {0:?}")]
    InvalidFramework(Vec<Violation>),
    #[error("unknown semantics {0:?}")]
    Unknown(String),
}

fn unit(v: f64) -> Result<f64, SemanticsError> {
    if v.is_nan() || !(0.0..=1.0).contains(&v) {
        Err(SemanticsError::OutOfRange(v))
    } else {
        Ok(v)
    }
}

/// DF-QuAD aggregation: `0` for no values, else `1 - Π(1 - v)`.
pub fn df_quad_aggregate(values: &[f64]) -> Result<f64, SemanticsError> {
    if values.is_empty() {
        return Ok(0.0);
    }
    let mut product = 1.0;
    for &v in values {
        product *= (1.0 - unit(v)?).abs();
    }
    Ok(1.0 - product)
}

/// DF-QuAD combination of a base score with aggregated attack and support.
pub fn df_quad_combine(base: f64, agg_attack: f64, agg_support: f64) -> Result<f64, SemanticsError> {
    let (v0, va, vs) = (unit(base)?, unit(agg_attack)?, unit(agg_support)?);
    let out = if va == vs {
        v0
    } else if va > vs {
        v0 - v0 * (vs - va).abs()
    } else {
        v0 + (1.0 - v0) * (vs - va).abs()
    };
    Ok(out)
}

/// QEM influence `h(v) = max(v, 0)² / (1 + max(v, 0)²)`.
pub fn qem_influence(energy: f64) -> Result<f64, SemanticsError> {
    if !energy.is_finite() {
        return Err(SemanticsError::NonFinite(energy));
    }
    let m = energy.max(0.0);
    let sq = m * m;
    Ok(sq / (1.0 + sq))
}

/// QEM strength `τ + (1 - τ)·h(E) - τ·h(-E)`.
pub fn qem_strength(base: f64, energy: f64) -> Result<f64, SemanticsError> {
    let tau = unit(base)?;
    Ok(tau + (1.0 - tau) * qem_influence(energy)? - tau * qem_influence(-energy)?)
}

/// A gradual semantics for trees: a pure function from an argument's base
/// score and the strengths of its direct children to its own strength.
pub trait Semantics: Send + Sync {
    fn name(&self) -> &'static str;

    fn strength(&self, base: f64, attackers: &[f64], supporters: &[f64]) -> Result<f64, SemanticsError>;
}

#[derive(Debug, Clone, Copy, Default)]
pub struct DfQuad;

impl Semantics for DfQuad {
    fn name(&self) -> &'static str {
        SemanticsId::DfQuad.as_str()
    }

    fn strength(&self, base: f64, attackers: &[f64], supporters: &[f64]) -> Result<f64, SemanticsError> {
        df_quad_combine(base, df_quad_aggregate(attackers)?, df_quad_aggregate(supporters)?)
    }
}

#[derive(Debug, Clone, Copy, Default)]
pub struct QuadraticEnergy;

impl Semantics for QuadraticEnergy {
    fn name(&self) -> &'static str {
        SemanticsId::Qem.as_str()
    }

    fn strength(&self, base: f64, attackers: &[f64], supporters: &[f64]) -> Result<f64, SemanticsError> {
        let support: f64 = supporters.iter().sum();
        let attack: f64 = attackers.iter().sum();
        qem_strength(base, support - attack)
    }
}

/// Names of the built-in semantics.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Default, Serialize, Deserialize)]
pub enum SemanticsId {
    #[default]
    #[serde(rename = "df-quad")]
    DfQuad,
    #[serde(rename = "qem")]
    Qem,
}

impl SemanticsId {
    pub const ALL: [SemanticsId; 2] = [SemanticsId::DfQuad, SemanticsId::Qem];

    pub fn as_str(self) -> &'static str {
        match self {
            SemanticsId::DfQuad => "df-quad",
            SemanticsId::Qem => "qem",
        }
    }

    pub fn semantics(self) -> &'static dyn Semantics {
        match self {
            SemanticsId::DfQuad => &DfQuad,
            SemanticsId::Qem => &QuadraticEnergy,
        }
    }
}

impl fmt::Display for SemanticsId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for SemanticsId {
    type Err = SemanticsError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "df-quad" => Ok(SemanticsId::DfQuad),
            "qem" => Ok(SemanticsId::Qem),
            other => Err(SemanticsError::Unknown(other.to_owned())),
        }
    }
}

/// Lookup table of semantics by name. Starts with `df-quad` and `qem`.
#[derive(Clone)]
pub struct Registry {
    entries: BTreeMap<String, Arc<dyn Semantics>>,
}

impl Default for Registry {
    fn default() -> Self {
        let mut r = Self {
            entries: BTreeMap::new(),
        };
        r.register(Arc::new(DfQuad));
        r.register(Arc::new(QuadraticEnergy));
        r
    }
}

impl Registry {
    pub fn register(&mut self, semantics: Arc<dyn Semantics>) {
        self.entries.insert(semantics.name().to_owned(), semantics);
    }

    pub fn get(&self, name: &str) -> Result<Arc<dyn Semantics>, SemanticsError> {
        self.entries
            .get(name)
            .cloned()
            .ok_or_else(|| SemanticsError::Unknown(name.to_owned()))
    }

    pub fn names(&self) -> Vec<&str> {
        self.entries.keys().map(String::as_str).collect()
    }
}

impl fmt::Debug for Registry {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Registry").field("names", &self.names()).finish()
    }
}

/// Final strength of every argument in a framework.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(transparent)]
pub struct StrengthMap(BTreeMap<ArgumentId, f64>);

impl StrengthMap {
    pub fn get(&self, id: &ArgumentId) -> Option<f64> {
        self.0.get(id).copied()
    }

    pub fn iter(&self) -> impl Iterator<Item = (&ArgumentId, f64)> {
        self.0.iter().map(|(k, v)| (k, *v))
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn as_map(&self) -> &BTreeMap<ArgumentId, f64> {
        &self.0
    }
}

impl FromIterator<(ArgumentId, f64)> for StrengthMap {
    fn from_iter<T: IntoIterator<Item = (ArgumentId, f64)>>(iter: T) -> Self {
        Self(iter.into_iter().collect())
    }
}

/// Evaluates every argument of a valid framework under `semantics`.
pub fn evaluate(qbaf: &Qbaf, semantics: &dyn Semantics) -> Result<StrengthMap, SemanticsError> {
    qbaf.validate().map_err(SemanticsError::InvalidFramework)?;

    let mut children: BTreeMap<&ArgumentId, Vec<(&ArgumentId, Polarity)>> = BTreeMap::new();
    for rel in qbaf.relations() {
        children
            .entry(&rel.target)
            .or_default()
            .push((&rel.source, rel.polarity));
    }
    let base: BTreeMap<&ArgumentId, f64> = qbaf
        .arguments()
        .iter()
        .map(|a| (&a.id, a.base_score))
        .collect();

    let mut strengths: BTreeMap<ArgumentId, f64> = BTreeMap::new();
    let mut attackers = Vec::new();
    let mut supporters = Vec::new();
    for id in qbaf.post_order() {
        attackers.clear();
        supporters.clear();
        for (child, polarity) in children.get(id).map(Vec::as_slice).unwrap_or(&[]) {
            let s = strengths[*child];
            match polarity {
                Polarity::Attack => attackers.push(s),
                Polarity::Support => supporters.push(s),
            }
        }
        let tau = base[id];
        let sigma = if attackers.is_empty() && supporters.is_empty() {
            tau
        } else {
            semantics.strength(tau, &attackers, &supporters)?
        };
        strengths.insert(id.clone(), sigma);
    }
    Ok(StrengthMap(strengths))
}

/// Shorthand for evaluating with a built-in semantics.
pub fn evaluate_with(qbaf: &Qbaf, id: SemanticsId) -> Result<StrengthMap, SemanticsError> {
    evaluate(qbaf, id.semantics())
}

/// Root strength of a framework.
pub fn root_strength(qbaf: &Qbaf, id: SemanticsId) -> Result<f64, SemanticsError> {
    let map = evaluate_with(qbaf, id)?;
    Ok(map.get(qbaf.root()).expect("evaluate covers the root"))
}
