//! Datasets of labelled claims, batch runs and accuracy tables.

use std::fmt::Write as _;
use std::io::Write as _;
use std::path::Path;
use std::time::{Duration, Instant};

use futures::stream::{self, StreamExt};
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::backend::{Backend, Exchange};
use crate::pipeline::{verify, Claim, MethodConfig, Verdict};
use crate::templates::TemplateSet;

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error("reading {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("line {line}: missing field {field:?}")]
    MissingField { line: usize, field: &'static str },
    #[error("line {line}: duplicate claim id {id:?}")]
    DuplicateId { line: usize, id: String },
    #[error("line {line}: context must be given for every claim or for none")]
    MixedContext { line: usize },
    #[error("dataset is empty")]
    Empty,
    #[error("cannot sample {requested} claims: {reason}")]
    Sample { requested: usize, reason: String },
    #[error("concurrency must be at least 1")]
    Concurrency,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Dataset {
    pub name: String,
    pub claims: Vec<Claim>,
    pub conditioned: bool,
}

#[derive(Deserialize)]
struct RawRecord {
    id: Option<serde_json::Value>,
    claim: Option<String>,
    context: Option<String>,
    label: Option<bool>,
}

impl Dataset {
    /// Reads one JSON object per line: `id`, `claim`, `label` and an optional
    /// `context`. Blank lines are skipped. The name is the file stem.
    pub fn load(path: &Path) -> Result<Self, HarnessError> {
        let text = std::fs::read_to_string(path).map_err(|source| HarnessError::Io {
            path: path.display().to_string(),
            source,
        })?;
        let name = path
            .file_stem()
            .map(|s| s.to_string_lossy().into_owned())
            .unwrap_or_else(|| "dataset".into());
        Self::parse(name, &text)
    }

    pub fn parse(name: impl Into<String>, text: &str) -> Result<Self, HarnessError> {
        let mut claims: Vec<Claim> = Vec::new();
        let mut with_context = None;
        for (i, line) in text.lines().enumerate() {
            let line_no = i + 1;
            if line.trim().is_empty() {
                continue;
            }
            let raw: RawRecord = serde_json::from_str(line).map_err(|e| HarnessError::Parse {
                line: line_no,
                message: e.to_string(),
            })?;
            let id = match raw.id {
                Some(serde_json::Value::String(s)) => s,
                Some(serde_json::Value::Number(n)) => n.to_string(),
                Some(_) => {
                    return Err(HarnessError::Parse {
                        line: line_no,
                        message: "id must be a string or number".into(),
                    })
                }
                None => return Err(HarnessError::MissingField { line: line_no, field: "id" }),
            };
            let text = raw
                .claim
                .filter(|c| !c.trim().is_empty())
                .ok_or(HarnessError::MissingField { line: line_no, field: "claim" })?;
            let label = raw
                .label
                .ok_or(HarnessError::MissingField { line: line_no, field: "label" })?;
            let has_context = raw.context.is_some();
            match with_context {
                None => with_context = Some(has_context),
                Some(prev) if prev != has_context => {
                    return Err(HarnessError::MixedContext { line: line_no })
                }
                _ => {}
            }
            if claims.iter().any(|c| c.id == id) {
                return Err(HarnessError::DuplicateId { line: line_no, id });
            }
            claims.push(Claim {
                id,
                text,
                context: raw.context,
                gold_label: Some(label),
            });
        }
        if claims.is_empty() {
            return Err(HarnessError::Empty);
        }
        Ok(Self {
            name: name.into(),
            claims,
            conditioned: with_context.unwrap_or(false),
        })
    }

    pub fn len(&self) -> usize {
        self.claims.len()
    }

    pub fn is_empty(&self) -> bool {
        self.claims.is_empty()
    }

    pub fn true_count(&self) -> usize {
        self.claims.iter().filter(|c| c.gold_label == Some(true)).count()
    }

    /// Fraction of claims labelled true.
    pub fn balance(&self) -> f64 {
        self.true_count() as f64 / self.len() as f64
    }

    /// A label-balanced subset of `n` claims drawn with `seed`, in dataset
    /// order. An odd `n` takes the extra claim from the true side.
    pub fn balanced_sample(&self, n: usize, seed: u64) -> Result<Dataset, HarnessError> {
        if n > self.len() {
            return Err(HarnessError::Sample {
                requested: n,
                reason: format!("dataset has only {} claims", self.len()),
            });
        }
        let (mut pos, mut neg): (Vec<usize>, Vec<usize>) =
            (0..self.len()).partition(|&i| self.claims[i].gold_label == Some(true));
        let want_pos = n - n / 2;
        let want_neg = n / 2;
        if pos.len() < want_pos || neg.len() < want_neg {
            return Err(HarnessError::Sample {
                requested: n,
                reason: format!(
                    "need {want_pos} true and {want_neg} false, have {} and {}",
                    pos.len(),
                    neg.len()
                ),
            });
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        pos.shuffle(&mut rng);
        neg.shuffle(&mut rng);
        let mut picked: Vec<usize> = pos[..want_pos].iter().chain(&neg[..want_neg]).copied().collect();
        picked.sort_unstable();
        Ok(Dataset {
            name: self.name.clone(),
            claims: picked.into_iter().map(|i| self.claims[i].clone()).collect(),
            conditioned: self.conditioned,
        })
    }
}

/// Outcome of one method on one claim.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClaimRecord {
    pub claim_id: String,
    pub method: String,
    pub gold_label: Option<bool>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub verdict: Option<Verdict>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

impl ClaimRecord {
    pub fn is_skipped(&self) -> bool {
        self.verdict.is_none()
    }

    pub fn is_correct(&self) -> bool {
        matches!((&self.verdict, self.gold_label), (Some(v), Some(g)) if v.label == g)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunResult {
    pub method: String,
    pub config: MethodConfig,
    pub dataset: String,
    pub records: Vec<ClaimRecord>,
    pub correct: usize,
    pub skipped: usize,
    /// correct / (total - skipped); 0 when every claim was skipped.
    pub accuracy: f64,
    pub wall_time: Duration,
}

impl RunResult {
    pub fn total(&self) -> usize {
        self.records.len()
    }

    pub fn evaluated(&self) -> usize {
        self.total() - self.skipped
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct RunOptions {
    pub sample: Option<usize>,
    pub seed: u64,
    /// Claims verified at once within a method.
    pub concurrency: usize,
}

impl Default for RunOptions {
    fn default() -> Self {
        Self {
            sample: None,
            seed: 0,
            concurrency: 8,
        }
    }
}

/// Runs every method over the dataset (or its balanced sample). Failures on
/// individual claims are recorded as skips.
pub async fn run(
    dataset: &Dataset,
    methods: &[MethodConfig],
    options: &RunOptions,
    backend: &dyn Backend,
    templates: &TemplateSet,
) -> Result<Vec<RunResult>, HarnessError> {
    if options.concurrency == 0 {
        return Err(HarnessError::Concurrency);
    }
    let sampled;
    let data = match options.sample {
        Some(n) => {
            sampled = dataset.balanced_sample(n, options.seed)?;
            &sampled
        }
        None => dataset,
    };
    let mut results = Vec::with_capacity(methods.len());
    for config in methods {
        let started = Instant::now();
        let label = config.label();
        let records: Vec<ClaimRecord> = stream::iter(&data.claims)
            .map(|claim| {
                let label = label.clone();
                async move {
                    let outcome = verify(claim, config, backend, templates).await;
                    if let Err(e) = &outcome {
                        tracing::warn!("{label} skipped claim {}: {e}", claim.id);
                    }
                    ClaimRecord {
                        claim_id: claim.id.clone(),
                        method: label,
                        gold_label: claim.gold_label,
                        error: outcome.as_ref().err().map(ToString::to_string),
                        verdict: outcome.ok(),
                    }
                }
            })
            .buffered(options.concurrency)
            .collect()
            .await;
        let correct = records.iter().filter(|r| r.is_correct()).count();
        let skipped = records.iter().filter(|r| r.is_skipped()).count();
        let evaluated = records.len() - skipped;
        results.push(RunResult {
            method: label,
            config: *config,
            dataset: data.name.clone(),
            correct,
            skipped,
            accuracy: if evaluated == 0 { 0.0 } else { correct as f64 / evaluated as f64 },
            records,
            wall_time: started.elapsed(),
        });
    }
    Ok(results)
}

fn accuracy_cell(r: &RunResult) -> String {
    if r.skipped == 0 {
        format!("{:.3}", r.accuracy)
    } else {
        format!("{:.3} ({} skipped)", r.accuracy, r.skipped)
    }
}

/// Plain-text grid: one row per dataset, one column per method.
pub fn render_table(model: &str, results: &[RunResult]) -> String {
    let (methods, rows) = pivot(results);
    let mut header = vec!["Model".to_owned(), "Dataset".to_owned()];
    header.extend(methods.iter().cloned());
    let mut body: Vec<Vec<String>> = Vec::new();
    for (dataset, cells) in &rows {
        let mut row = vec![model.to_owned(), dataset.clone()];
        row.extend(cells.iter().map(|c| c.map(accuracy_cell).unwrap_or_else(|| "-".into())));
        body.push(row);
    }
    let widths: Vec<usize> = (0..header.len())
        .map(|i| {
            body.iter()
                .map(|r| r[i].chars().count())
                .chain([header[i].chars().count()])
                .max()
                .unwrap_or(0)
        })
        .collect();
    let line = |cells: &[String]| {
        let mut s = String::from("|");
        for (c, w) in cells.iter().zip(&widths) {
            let _ = write!(s, " {c:<w$} |");
        }
        s.push('\n');
        s
    };
    let mut out = line(&header);
    out.push('|');
    for w in &widths {
        out.push_str(&"-".repeat(w + 2));
        out.push('|');
    }
    out.push('\n');
    for row in &body {
        out.push_str(&line(row));
    }
    out
}

/// The same grid as comma-separated values, accuracies unrounded.
pub fn render_csv(model: &str, results: &[RunResult]) -> String {
    let (methods, rows) = pivot(results);
    let mut w = csv::Writer::from_writer(Vec::new());
    let mut header = vec!["model".to_owned(), "dataset".to_owned()];
    header.extend(methods.iter().cloned());
    w.write_record(&header).expect("in-memory write");
    for (dataset, cells) in &rows {
        let mut row = vec![model.to_owned(), dataset.clone()];
        row.extend(cells.iter().map(|c| c.map(|r| r.accuracy.to_string()).unwrap_or_default()));
        w.write_record(&row).expect("in-memory write");
    }
    String::from_utf8(w.into_inner().expect("in-memory flush")).expect("utf-8 input")
}

type Pivot<'a> = (Vec<String>, Vec<(String, Vec<Option<&'a RunResult>>)>);

fn pivot(results: &[RunResult]) -> Pivot<'_> {
    let mut methods: Vec<String> = Vec::new();
    let mut datasets: Vec<String> = Vec::new();
    for r in results {
        if !methods.contains(&r.method) {
            methods.push(r.method.clone());
        }
        if !datasets.contains(&r.dataset) {
            datasets.push(r.dataset.clone());
        }
    }
    let rows = datasets
        .into_iter()
        .map(|d| {
            let cells = methods
                .iter()
                .map(|m| results.iter().find(|r| &r.method == m && r.dataset == d))
                .collect();
            (d, cells)
        })
        .collect();
    (methods, rows)
}

#[derive(Serialize)]
struct AuditLine<'a> {
    claim_id: &'a str,
    method: &'a str,
    #[serde(flatten)]
    exchange: &'a Exchange,
}

/// Writes `results.txt`, `results.csv`, `records.jsonl` (one line per claim
/// and method) and `audit.jsonl` (every prompt and response) into `dir`.
pub fn write_outputs(dir: &Path, model: &str, results: &[RunResult]) -> std::io::Result<()> {
    std::fs::create_dir_all(dir)?;
    std::fs::write(dir.join("results.txt"), render_table(model, results))?;
    std::fs::write(dir.join("results.csv"), render_csv(model, results))?;
    let mut records = std::io::BufWriter::new(std::fs::File::create(dir.join("records.jsonl"))?);
    let mut audit = std::io::BufWriter::new(std::fs::File::create(dir.join("audit.jsonl"))?);
    for r in results {
        for rec in &r.records {
            serde_json::to_writer(&mut records, rec)?;
            records.write_all(b"\n")?;
            let Some(v) = &rec.verdict else { continue };
            for exchange in &v.transcript.exchanges {
                let line = AuditLine {
                    claim_id: &rec.claim_id,
                    method: &rec.method,
                    exchange,
                };
                serde_json::to_writer(&mut audit, &line)?;
                audit.write_all(b"\n")?;
            }
        }
    }
    records.flush()?;
    audit.flush()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn four() -> Dataset {
        Dataset::parse(
            "four",
            r#"{"id": "1", "claim": "a", "label": true}
{"id": "2", "claim": "b", "label": false}

{"id": 3, "claim": "c", "label": true}
{"id": "4", "claim": "d", "label": false}
"#,
        )
        .unwrap()
    }

    #[test]
    fn loads_and_reports_balance() {
        let d = four();
        assert_eq!(d.len(), 4);
        assert_eq!(d.balance(), 0.5);
        assert!(!d.conditioned);
        assert_eq!(d.claims[2].id, "3");
    }

    #[test]
    fn missing_label_names_the_line() {
        let err = Dataset::parse("x", "{\"id\":\"1\",\"claim\":\"a\",\"label\":true}\n{\"id\":\"2\",\"claim\":\"b\"}")
            .unwrap_err();
        assert!(matches!(err, HarnessError::MissingField { line: 2, field: "label" }));
        let err = Dataset::parse("x", "{\"id\":\"1\",").unwrap_err();
        assert!(matches!(err, HarnessError::Parse { line: 1, .. }));
    }

    #[test]
    fn context_presence_must_agree() {
        let ok = Dataset::parse(
            "med",
            "{\"id\":\"1\",\"claim\":\"a\",\"context\":\"i\",\"label\":true}",
        )
        .unwrap();
        assert!(ok.conditioned);
        let err = Dataset::parse(
            "med",
            "{\"id\":\"1\",\"claim\":\"a\",\"context\":\"i\",\"label\":true}\n{\"id\":\"2\",\"claim\":\"b\",\"label\":true}",
        )
        .unwrap_err();
        assert!(matches!(err, HarnessError::MixedContext { line: 2 }));
    }

    #[test]
    fn sampling() {
        let d = four();
        assert!(matches!(d.balanced_sample(10, 1), Err(HarnessError::Sample { .. })));
        let a = d.balanced_sample(2, 9).unwrap();
        let b = d.balanced_sample(2, 9).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.true_count(), 1);
        assert_eq!(a.len(), 2);
        assert_eq!(d.balanced_sample(4, 0).unwrap(), d);
    }
}
