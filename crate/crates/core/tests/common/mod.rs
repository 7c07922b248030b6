#![allow(dead_code)]

use std::sync::atomic::{AtomicUsize, Ordering};

use async_trait::async_trait;
use qbaf_core::backend::{Backend, BackendError, BackendKind, CompletionRequest};
use qbaf_core::qbaf::{Argument, Qbaf, Relation};

/// Backend answering through a closure, counting calls.
pub struct FnBackend<F> {
    pub answer: F,
    pub calls: AtomicUsize,
}

impl<F> FnBackend<F>
where
    F: Fn(&CompletionRequest) -> Result<String, BackendError> + Send + Sync,
{
    pub fn new(answer: F) -> Self {
        Self {
            answer,
            calls: AtomicUsize::new(0),
        }
    }

    pub fn calls(&self) -> usize {
        self.calls.load(Ordering::SeqCst)
    }
}

#[async_trait]
impl<F> Backend for FnBackend<F>
where
    F: Fn(&CompletionRequest) -> Result<String, BackendError> + Send + Sync,
{
    fn kind(&self) -> BackendKind {
        BackendKind::Mock
    }

    fn describe(&self) -> String {
        "scripted".into()
    }

    async fn complete(&self, request: &CompletionRequest) -> Result<String, BackendError> {
        self.calls.fetch_add(1, Ordering::SeqCst);
        (self.answer)(request)
    }
}

pub fn arg(id: &str, base_score: f64) -> Argument {
    Argument {
        id: id.into(),
        text: format!("text of {id}"),
        base_score,
    }
}

pub type Row<'a> = (&'a str, f64, Option<(&'a str, bool)>);

/// Builds a tree from `(id, base, Some((parent, is_attack)))` rows; the row
/// without a parent is the root.
pub fn tree(rows: &[Row]) -> Qbaf {
    let root = rows.iter().find(|r| r.2.is_none()).expect("a root row").0;
    let arguments = rows.iter().map(|r| arg(r.0, r.1)).collect();
    let relations = rows
        .iter()
        .filter_map(|r| {
            r.2.map(|(parent, attack)| {
                if attack {
                    Relation::attack(r.0, parent)
                } else {
                    Relation::support(r.0, parent)
                }
            })
        })
        .collect();
    Qbaf::try_new(root.into(), arguments, relations).expect("valid test tree")
}
