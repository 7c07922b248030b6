//! Quantitative bipolar argumentation for explainable, contestable claim verification.

pub mod api;
pub mod backend;
pub mod contestation;
pub mod decision;
pub mod generation;
pub mod harness;
pub mod llm;
pub mod pipeline;
pub mod properties;
pub mod qbaf;
pub mod random;
pub mod semantics;
pub mod templates;
