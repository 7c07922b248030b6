use std::sync::Arc;

use axum::body::Body;
use axum::http::{Request, StatusCode};
use http_body_util::BodyExt;
use serde_json::{json, Value};
use tower::ServiceExt;

use qbaf_core::backend::MockBackend;
use qbaf_core::templates::TemplateSet;
use qbaf_service::{router, AppState, ServiceConfig};

fn state(config: ServiceConfig) -> Arc<AppState> {
    Arc::new(AppState::new(
        Arc::new(MockBackend::new(7)),
        TemplateSet::default(),
        config,
    ))
}

async fn call(state: &Arc<AppState>, method: &str, uri: &str, body: Option<Value>) -> (StatusCode, Value) {
    let req = Request::builder().method(method).uri(uri);
    let req = match body {
        Some(b) => req
            .header("content-type", "application/json")
            .body(Body::from(b.to_string())),
        None => req.body(Body::empty()),
    }
    .unwrap();
    let resp = router(state.clone()).oneshot(req).await.unwrap();
    let status = resp.status();
    let bytes = resp.into_body().collect().await.unwrap().to_bytes();
    let value = if bytes.is_empty() {
        Value::Null
    } else {
        serde_json::from_slice(&bytes).unwrap()
    };
    (status, value)
}

fn demo_framework() -> Value {
    json!({
        "root": "claim",
        "arguments": [
            {"id": "claim", "text": "The claim", "base_score": 0.5},
            {"id": "pro", "text": "A supporter", "base_score": 0.6},
            {"id": "con", "text": "An attacker", "base_score": 0.9}
        ],
        "relations": [
            {"source": "pro", "target": "claim", "polarity": "support"},
            {"source": "con", "target": "claim", "polarity": "attack"}
        ]
    })
}

fn assert_label_matches_strength(v: &Value) {
    let s = v["root_strength"].as_f64().unwrap();
    assert_eq!(v["label"].as_bool().unwrap(), s > 0.5, "{v}");
}

#[tokio::test]
async fn verify_argllm_opens_a_session() {
    let st = state(ServiceConfig::default());
    let (status, body) = call(
        &st,
        "POST",
        "/verify",
        Some(json!({"claim": "Water boils at 100 C at sea level.", "method": "argllm", "generation": {"depth": 2}})),
    )
    .await;
    assert_eq!(status, StatusCode::OK, "{body}");
    let verdict = &body["verdict"];
    assert_eq!(verdict["qbaf"]["arguments"].as_array().unwrap().len(), 7);
    assert!(verdict["strengths"].is_object());
    assert_label_matches_strength(verdict);
    let id = body["session_id"].as_str().unwrap();

    let (status, view) = call(&st, "GET", &format!("/sessions/{id}"), None).await;
    assert_eq!(status, StatusCode::OK);
    assert_eq!(view["qbaf"], verdict["qbaf"]);
    assert_eq!(view["root_strength"], verdict["root_strength"]);
    assert_eq!(view["stances"].as_object().unwrap().len(), 6);
    assert_label_matches_strength(&view);
}

#[tokio::test]
async fn verify_baselines_have_no_session() {
    let st = state(ServiceConfig::default());
    for method in ["chain_of_thought", "direct_question", "est_confidence"] {
        let (status, body) = call(
            &st,
            "POST",
            "/verify",
            Some(json!({"claim": "The moon is made of cheese.", "method": method})),
        )
        .await;
        assert_eq!(status, StatusCode::OK, "{body}");
        assert!(body.get("session_id").is_none());
        assert!(!body["verdict"]["transcript"]["exchanges"].as_array().unwrap().is_empty());
    }
    let (_, body) = call(
        &st,
        "POST",
        "/verify",
        Some(json!({"claim": "x", "method": "chain_of_thought"})),
    )
    .await;
    assert_eq!(body["verdict"]["transcript"]["exchanges"].as_array().unwrap().len(), 2);
    assert_eq!(st.session_count(), 0);
}

#[tokio::test]
async fn malformed_requests_are_400() {
    let st = state(ServiceConfig::default());
    let (status, body) = call(&st, "POST", "/verify", Some(json!({"context": "x"}))).await;
    assert_eq!(status, StatusCode::BAD_REQUEST);
    assert_eq!(body["error"], "bad_request");
    let (status, _) = call(&st, "POST", "/verify", Some(json!({"claim": "  "}))).await;
    assert_eq!(status, StatusCode::BAD_REQUEST);
    let (status, _) = call(
        &st,
        "POST",
        "/verify",
        Some(json!({"claim": "c", "generation": {"depth": 0}})),
    )
    .await;
    assert_eq!(status, StatusCode::BAD_REQUEST);
    let (status, _) = call(&st, "POST", "/verify", Some(json!({"claim": "c", "method": "guess"}))).await;
    assert_eq!(status, StatusCode::BAD_REQUEST);
}

#[tokio::test]
async fn contest_flips_the_demo_verdict() {
    let st = state(ServiceConfig::default());
    let (status, view) = call(&st, "POST", "/sessions", Some(json!({"qbaf": demo_framework()}))).await;
    assert_eq!(status, StatusCode::CREATED, "{view}");
    assert_eq!(view["label"], false);
    assert!((view["root_strength"].as_f64().unwrap() - 0.35).abs() < 1e-12);
    assert_eq!(view["stances"]["con"], "con");
    let id = view["session_id"].as_str().unwrap().to_owned();

    let (status, body) = call(
        &st,
        "POST",
        &format!("/sessions/{id}/contest"),
        Some(json!({"kind": "set_base_score", "target": "con", "new_score": 0.5})),
    )
    .await;
    assert_eq!(status, StatusCode::OK, "{body}");
    let diff = &body["diff"];
    assert_eq!(diff["label_flipped"], true);
    assert_eq!(diff["before_label"], false);
    assert_eq!(diff["after_label"], true);
    assert_eq!(diff["predicted_direction"], "nondecrease");
    assert_eq!(diff["observed_change"], "increase");
    assert!((diff["after_root_strength"].as_f64().unwrap() - 0.55).abs() < 1e-12);
    assert_eq!(body["session"]["history"].as_array().unwrap().len(), 1);
    assert_label_matches_strength(&body["session"]);
}

#[tokio::test]
async fn invalid_edits_and_unknown_sessions() {
    let st = state(ServiceConfig::default());
    let (_, view) = call(&st, "POST", "/sessions", Some(json!({"qbaf": demo_framework()}))).await;
    let id = view["session_id"].as_str().unwrap().to_owned();
    let uri = format!("/sessions/{id}/contest");

    let (status, body) = call(
        &st,
        "POST",
        &uri,
        Some(json!({"kind": "set_base_score", "target": "nobody", "new_score": 0.5})),
    )
    .await;
    assert_eq!(status, StatusCode::UNPROCESSABLE_ENTITY, "{body}");
    let (status, _) = call(&st, "POST", &uri, Some(json!({"kind": "remove_argument", "target": "claim"}))).await;
    assert_eq!(status, StatusCode::UNPROCESSABLE_ENTITY);
    let (status, _) = call(
        &st,
        "POST",
        &uri,
        Some(json!({"kind": "set_base_score", "target": "con", "new_score": 1.5})),
    )
    .await;
    assert_eq!(status, StatusCode::UNPROCESSABLE_ENTITY);
    let (status, _) = call(&st, "POST", &uri, Some(json!({"kind": "teleport"}))).await;
    assert_eq!(status, StatusCode::BAD_REQUEST);

    let (status, _) = call(&st, "GET", "/sessions/missing", None).await;
    assert_eq!(status, StatusCode::NOT_FOUND);
    let (status, _) = call(
        &st,
        "POST",
        "/sessions/missing/contest",
        Some(json!({"kind": "remove_argument", "target": "con"})),
    )
    .await;
    assert_eq!(status, StatusCode::NOT_FOUND);

    let (_, view) = call(&st, "GET", &format!("/sessions/{id}"), None).await;
    assert!(view["history"].as_array().unwrap().is_empty());
}

#[tokio::test]
async fn invalid_framework_is_rejected() {
    let st = state(ServiceConfig::default());
    let mut qbaf = demo_framework();
    qbaf["relations"][1]["target"] = json!("pro");
    qbaf["relations"]
        .as_array_mut()
        .unwrap()
        .push(json!({"source": "con", "target": "claim", "polarity": "attack"}));
    let (status, body) = call(&st, "POST", "/sessions", Some(json!({"qbaf": qbaf}))).await;
    assert_eq!(status, StatusCode::UNPROCESSABLE_ENTITY, "{body}");
}

#[tokio::test]
async fn concurrent_contests_are_serialized() {
    let st = state(ServiceConfig::default());
    let (_, view) = call(&st, "POST", "/sessions", Some(json!({"qbaf": demo_framework()}))).await;
    let id = view["session_id"].as_str().unwrap().to_owned();
    let uri = format!("/sessions/{id}/contest");
    let edits = [
        json!({"kind": "set_base_score", "target": "con", "new_score": 0.5}),
        json!({"kind": "add_argument", "target": "extra", "new_argument": {"text": "more", "polarity": "support", "base_score": 0.3, "parent": "pro"}}),
    ];
    let calls = edits.iter().map(|e| call(&st, "POST", &uri, Some(e.clone())));
    let results = futures::future::join_all(calls).await;
    for (status, body) in &results {
        assert_eq!(*status, StatusCode::OK, "{body}");
    }
    let lens: Vec<usize> = results
        .iter()
        .map(|(_, b)| b["session"]["history"].as_array().unwrap().len())
        .collect();
    let mut sorted = lens.clone();
    sorted.sort();
    assert_eq!(sorted, vec![1, 2]);
    let session = st.session(&id).unwrap();
    assert_eq!(session.history.len(), 2);
    assert!(session.replays_consistently());
}

#[tokio::test]
async fn fork_replays_a_prefix() {
    let st = state(ServiceConfig::default());
    let (_, view0) = call(&st, "POST", "/sessions", Some(json!({"qbaf": demo_framework()}))).await;
    let id = view0["session_id"].as_str().unwrap().to_owned();
    let uri = format!("/sessions/{id}/contest");
    let (_, after1) = call(
        &st,
        "POST",
        &uri,
        Some(json!({"kind": "set_base_score", "target": "con", "new_score": 0.5})),
    )
    .await;
    call(&st, "POST", &uri, Some(json!({"kind": "remove_argument", "target": "pro"}))).await;
    call(
        &st,
        "POST",
        &uri,
        Some(json!({"kind": "set_base_score", "target": "claim", "new_score": 0.9})),
    )
    .await;

    let (status, forked) = call(&st, "POST", &format!("/sessions/{id}/fork"), Some(json!({"history_len": 1}))).await;
    assert_eq!(status, StatusCode::CREATED);
    assert_ne!(forked["session_id"], view0["session_id"]);
    assert_eq!(forked["qbaf"], after1["session"]["qbaf"]);
    assert_eq!(forked["strengths"], after1["session"]["strengths"]);

    let (_, back) = call(&st, "POST", &format!("/sessions/{id}/fork"), Some(json!({"history_len": 0}))).await;
    assert_eq!(back["label"], view0["label"]);
    assert_eq!(back["qbaf"], view0["qbaf"]);

    let (status, _) = call(&st, "POST", &format!("/sessions/{id}/fork"), Some(json!({"history_len": 9}))).await;
    assert_eq!(status, StatusCode::BAD_REQUEST);
}

#[tokio::test]
async fn snapshots_survive_a_restart() {
    let dir = tempfile::tempdir().unwrap();
    let config = ServiceConfig {
        snapshot_dir: Some(dir.path().to_path_buf()),
        permissive_cors: false,
    };
    let st = state(config.clone());
    let (_, view) = call(&st, "POST", "/sessions", Some(json!({"qbaf": demo_framework()}))).await;
    let id = view["session_id"].as_str().unwrap().to_owned();
    let (_, contested) = call(
        &st,
        "POST",
        &format!("/sessions/{id}/contest"),
        Some(json!({"kind": "set_base_score", "target": "con", "new_score": 0.5})),
    )
    .await;
    std::fs::write(dir.path().join("junk.json"), "{not json").unwrap();

    let restarted = state(config);
    assert_eq!(restarted.restore().unwrap(), 1);
    let (status, view) = call(&restarted, "GET", &format!("/sessions/{id}"), None).await;
    assert_eq!(status, StatusCode::OK);
    assert_eq!(view, contested["session"]);
}

#[tokio::test]
async fn semantics_health_and_cors() {
    let st = state(ServiceConfig {
        snapshot_dir: None,
        permissive_cors: true,
    });
    let (status, body) = call(&st, "GET", "/semantics", None).await;
    assert_eq!(status, StatusCode::OK);
    let ids: Vec<&str> = body["semantics"]
        .as_array()
        .unwrap()
        .iter()
        .map(|s| s["id"].as_str().unwrap())
        .collect();
    assert_eq!(ids, ["df-quad", "qem"]);
    assert_eq!(body["decision_threshold"], 0.5);

    let (status, body) = call(&st, "GET", "/health", None).await;
    assert_eq!(status, StatusCode::OK);
    assert_eq!(body["status"], "ok");
    assert_eq!(body["backend"], "mock(seed=7)");

    let req = Request::builder()
        .method("OPTIONS")
        .uri("/sessions")
        .header("origin", "http://localhost:5173")
        .header("access-control-request-method", "POST")
        .body(Body::empty())
        .unwrap();
    let resp = router(st.clone()).oneshot(req).await.unwrap();
    assert!(resp.headers().contains_key("access-control-allow-origin"));

    let closed = state(ServiceConfig::default());
    let req = Request::builder()
        .uri("/health")
        .header("origin", "http://localhost:5173")
        .body(Body::empty())
        .unwrap();
    let resp = router(closed).oneshot(req).await.unwrap();
    assert!(!resp.headers().contains_key("access-control-allow-origin"));
}
