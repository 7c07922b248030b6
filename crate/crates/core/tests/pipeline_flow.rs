mod common;

use std::sync::Mutex;

use qbaf_core::backend::{BackendError, MockBackend, Task};
use qbaf_core::decision::decide;
use qbaf_core::generation::{ClaimBaseMode, GenerationParams};
use qbaf_core::pipeline::{
    verify, verify_argllm, verify_chain_of_thought, verify_direct_question, verify_est_confidence,
    Claim, Method, MethodConfig, PipelineError,
};
use qbaf_core::qbaf::{Polarity, Stance};
use qbaf_core::semantics::{evaluate_with, SemanticsId};
use qbaf_core::templates::TemplateSet;

use common::FnBackend;

fn argllm(depth: usize, mode: ClaimBaseMode, sem: SemanticsId) -> MethodConfig {
    MethodConfig::argllm(sem, GenerationParams::new(depth, mode))
}

/// Arguments get fixed scores by polarity; the claim itself scores 40.
fn scorer(support: &'static str, attack: &'static str) -> impl Fn(&qbaf_core::backend::CompletionRequest) -> Result<String, BackendError> + Send + Sync {
    move |req| {
        Ok(match &req.task {
            Task::GenerateArgument { polarity, index, .. } => format!("{polarity:?} argument {index}"),
            Task::ScoreArgument { polarity: Polarity::Support } => support.to_owned(),
            Task::ScoreArgument { polarity: Polarity::Attack } => attack.to_owned(),
            Task::ScoreClaim => "40".into(),
            other => panic!("unexpected task {other:?}"),
        })
    }
}

#[tokio::test]
async fn composed_example_gives_0_575_true() {
    let backend = FnBackend::new(scorer("Confidence: 85", "70/100"));
    let claim = Claim::new("c", "Coffee improves concentration.");
    let v = verify_argllm(
        &claim,
        &argllm(1, ClaimBaseMode::FixedHalf, SemanticsId::DfQuad),
        &backend,
        &TemplateSet::default(),
    )
    .await
    .unwrap();
    assert!((v.root_strength - 0.575).abs() < 1e-12);
    assert!(v.label);
    assert_eq!(v.method, "0.5 Base Arg (D=1)");
    let q = v.qbaf.as_ref().unwrap();
    assert_eq!(q.len(), 3);
    assert_eq!(q.argument(q.root()).unwrap().base_score, 0.5);
    // two generations and two scores
    assert_eq!(backend.calls(), 4);
    assert_eq!(v.transcript.len(), 4);
}

#[tokio::test]
async fn equal_scores_give_exactly_half_and_false() {
    let backend = FnBackend::new(scorer("60", "60"));
    let v = verify_argllm(
        &Claim::new("c", "x"),
        &argllm(1, ClaimBaseMode::FixedHalf, SemanticsId::DfQuad),
        &backend,
        &TemplateSet::default(),
    )
    .await
    .unwrap();
    assert_eq!(v.root_strength, 0.5);
    assert!(!v.label);
}

#[tokio::test]
async fn estimated_base_uses_claim_score() {
    let backend = FnBackend::new(scorer("60", "60"));
    let v = verify_argllm(
        &Claim::new("c", "x"),
        &argllm(1, ClaimBaseMode::Estimated, SemanticsId::DfQuad),
        &backend,
        &TemplateSet::default(),
    )
    .await
    .unwrap();
    let q = v.qbaf.unwrap();
    assert_eq!(q.argument(q.root()).unwrap().base_score, 0.4);
    assert_eq!(v.root_strength, 0.4);
    assert_eq!(v.method, "Est. Base Arg (D=1)");
}

#[tokio::test]
async fn tree_sizes_and_stances() {
    let mock = MockBackend::new(11);
    for (depth, size) in [(1, 3), (2, 7), (3, 15)] {
        let v = verify_argllm(
            &Claim::new("c", "Some claim."),
            &argllm(depth, ClaimBaseMode::FixedHalf, SemanticsId::Qem),
            &mock,
            &TemplateSet::default(),
        )
        .await
        .unwrap();
        let q = v.qbaf.as_ref().unwrap();
        assert_eq!(q.len(), size);
        q.ensure_valid().unwrap();
        let stances = q.stances().unwrap();
        let pro = stances.values().filter(|s| **s == Stance::Pro).count();
        assert_eq!(pro * 2, size - 1);
        assert_eq!(v.transcript.warnings.is_empty(), depth <= 2);
    }
}

#[tokio::test]
async fn verdict_is_faithful_to_its_framework() {
    let mock = MockBackend::new(5);
    for sem in SemanticsId::ALL {
        for mode in [ClaimBaseMode::FixedHalf, ClaimBaseMode::Estimated] {
            for i in 0..10 {
                let claim = Claim::new(format!("c{i}"), format!("Claim number {i} holds."));
                let v = verify_argllm(&claim, &argllm(2, mode, sem), &mock, &TemplateSet::default())
                    .await
                    .unwrap();
                let q = v.qbaf.as_ref().unwrap();
                let again = evaluate_with(q, sem).unwrap();
                assert_eq!(again.get(q.root()), Some(v.root_strength));
                assert_eq!(Some(&again), v.strengths.as_ref());
                assert_eq!(v.label, decide(v.root_strength));
            }
        }
    }
}

#[tokio::test]
async fn mock_runs_are_reproducible() {
    let claim = Claim::new("c", "The Eiffel Tower is in Rome.").with_context("Paris is in France.");
    let cfg = argllm(2, ClaimBaseMode::Estimated, SemanticsId::DfQuad);
    let a = verify(&claim, &cfg, &MockBackend::new(7), &TemplateSet::default()).await.unwrap();
    let b = verify(&claim, &cfg, &MockBackend::new(7), &TemplateSet::default()).await.unwrap();
    assert_eq!(a.qbaf, b.qbaf);
    assert_eq!(a.root_strength, b.root_strength);
    let prompts = |v: &qbaf_core::pipeline::Verdict| {
        v.transcript
            .exchanges
            .iter()
            .map(|e| (e.prompt.clone(), e.response.clone()))
            .collect::<Vec<_>>()
    };
    assert_eq!(prompts(&a), prompts(&b));
    assert!(a.transcript.exchanges[0]
        .prompt
        .contains("Consider the following background information: Paris is in France."));
}

#[tokio::test]
async fn unparseable_scores_fall_back_to_neutral() {
    let backend = FnBackend::new(|req: &qbaf_core::backend::CompletionRequest| {
        Ok(match &req.task {
            Task::GenerateArgument { .. } => "an argument".to_owned(),
            _ => "no idea".to_owned(),
        })
    });
    let v = verify_argllm(
        &Claim::new("c", "x"),
        &argllm(1, ClaimBaseMode::FixedHalf, SemanticsId::DfQuad),
        &backend,
        &TemplateSet::default(),
    )
    .await
    .unwrap();
    let q = v.qbaf.unwrap();
    assert!(q.arguments().iter().all(|a| a.base_score == 0.5));
    // each score asked twice
    assert_eq!(backend.calls(), 2 + 2 * 2);
    assert_eq!(v.transcript.warnings.len(), 2);
}

#[tokio::test]
async fn backend_failure_propagates() {
    let backend = FnBackend::new(|_: &qbaf_core::backend::CompletionRequest| Err(BackendError::RateLimited));
    let err = verify_argllm(
        &Claim::new("c", "x"),
        &argllm(1, ClaimBaseMode::FixedHalf, SemanticsId::DfQuad),
        &backend,
        &TemplateSet::default(),
    )
    .await
    .unwrap_err();
    assert!(matches!(err, PipelineError::Generation(_)));

    let err = verify_argllm(
        &Claim::new("c", "   "),
        &argllm(1, ClaimBaseMode::FixedHalf, SemanticsId::DfQuad),
        &backend,
        &TemplateSet::default(),
    )
    .await
    .unwrap_err();
    assert!(matches!(err, PipelineError::EmptyClaim(_)));
}

fn answers(list: &'static [&'static str]) -> FnBackend<impl Fn(&qbaf_core::backend::CompletionRequest) -> Result<String, BackendError> + Send + Sync> {
    let next = Mutex::new(0usize);
    FnBackend::new(move |_| {
        let mut i = next.lock().unwrap();
        let a = list[(*i).min(list.len() - 1)];
        *i += 1;
        Ok(a.to_owned())
    })
}

#[tokio::test]
async fn direct_question_parsing() {
    let cfg = MethodConfig::baseline(Method::DirectQuestion);
    let t = TemplateSet::default();
    let c = Claim::new("c", "x");
    for (answer, label) in [
        ("True.", true),
        ("false", false),
        ("The claim is TRUE because of this; it is not false.", true),
    ] {
        let b = answers(Box::leak(Box::new([answer])));
        let v = verify_direct_question(&c, &cfg, &b, &t).await.unwrap();
        assert_eq!(v.label, label, "{answer}");
        assert_eq!(v.root_strength, if label { 1.0 } else { 0.0 });
        assert_eq!(b.calls(), 1);
        assert!(v.qbaf.is_none());
    }
    let b = answers(&["Hmm, hard to say.", "False"]);
    let v = verify_direct_question(&c, &cfg, &b, &t).await.unwrap();
    assert!(!v.label);
    assert_eq!(b.calls(), 2);
    let b = answers(&["maybe", "perhaps"]);
    assert!(matches!(
        verify_direct_question(&c, &cfg, &b, &t).await,
        Err(PipelineError::Unparseable(_))
    ));
    assert_eq!(b.calls(), 2);
}

#[tokio::test]
async fn confidence_threshold_is_strict() {
    let cfg = MethodConfig::baseline(Method::EstConfidence);
    let t = TemplateSet::default();
    let c = Claim::new("c", "x");
    for (answer, strength, label) in [("70", 0.7, true), ("50", 0.5, false), ("0", 0.0, false), ("50.5", 0.505, true)] {
        let v = verify_est_confidence(&c, &cfg, &answers(Box::leak(Box::new([answer]))), &t)
            .await
            .unwrap();
        assert!((v.root_strength - strength).abs() < 1e-12);
        assert_eq!(v.label, label, "{answer}");
    }
    assert!(verify_est_confidence(&c, &cfg, &answers(&["unsure"]), &t).await.is_err());
}

#[tokio::test]
async fn chain_of_thought_two_turns() {
    let cfg = MethodConfig::baseline(Method::ChainOfThought);
    let t = TemplateSet::default();
    let c = Claim::new("c", "x");
    let b = answers(&["Step 1: a\nStep 2: b\nStep 3: c", "True"]);
    let v = verify_chain_of_thought(&c, &cfg, &b, &t).await.unwrap();
    assert!(v.label);
    assert_eq!(v.transcript.len(), 2);
    assert!(v.transcript.exchanges[1].prompt.contains("Step 3: c"));
    assert_eq!(v.transcript.exchanges[0].task, "reasoning");
    assert_eq!(v.transcript.exchanges[1].task, "decision");

    // turn 2 is retried alone
    let b = answers(&["Step 1: a", "unclear", "still unclear"]);
    let err = verify_chain_of_thought(&c, &cfg, &b, &t).await.unwrap_err();
    assert!(matches!(err, PipelineError::Unparseable(_)));
    assert_eq!(b.calls(), 3);
}
