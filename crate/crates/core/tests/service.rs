mod common;

use std::sync::Arc;

use guideqa::service::{self, ServiceConfig, ServiceState, MAX_QUESTION_CHARS, MISSED_FILE};
use reqwest::{Client, StatusCode};
use serde_json::{json, Value};

const TOKEN: &str = "s3cret";

fn config(data_dir: Option<std::path::PathBuf>) -> ServiceConfig {
    ServiceConfig {
        data_dir,
        kb_path: Some(common::data("guide.json")),
        templates_path: Some(common::data("templates.json")),
        admin_token: Some(TOKEN.into()),
        cors_origins: vec!["http://localhost:5173".into()],
        ..ServiceConfig::default()
    }
}

async fn start(state: Arc<ServiceState>) -> String {
    let listener = tokio::net::TcpListener::bind("127.0.0.1:0").await.unwrap();
    let addr = listener.local_addr().unwrap();
    tokio::spawn(service::serve_on(listener, state));
    format!("http://{addr}")
}

async fn ready(data_dir: Option<std::path::PathBuf>) -> (String, Arc<ServiceState>) {
    let state = Arc::new(ServiceState::new(config(data_dir)).unwrap());
    state.rebuild().unwrap();
    let base = start(state.clone()).await;
    (base, state)
}

async fn ask(client: &Client, base: &str, body: Value) -> (StatusCode, Value) {
    let r = client
        .post(format!("{base}/v1/ask"))
        .json(&body)
        .send()
        .await
        .unwrap();
    let status = r.status();
    (status, r.json().await.unwrap_or(Value::Null))
}

#[tokio::test]
async fn unloaded_service_is_unavailable() {
    let state = Arc::new(ServiceState::new(config(None)).unwrap());
    let base = start(state).await;
    let client = Client::new();
    let (status, _) = ask(&client, &base, json!({"question": "What is VERA?"})).await;
    assert_eq!(status, StatusCode::SERVICE_UNAVAILABLE);
    let health: Value = client
        .get(format!("{base}/v1/health"))
        .send()
        .await
        .unwrap()
        .json()
        .await
        .unwrap();
    assert_eq!(health["status"], "not_ready");
}

#[tokio::test]
async fn ask_returns_golden_answer_and_echoes_session() {
    let (base, _) = ready(None).await;
    let client = Client::new();
    let (status, body) = ask(
        &client,
        &base,
        json!({"question": "What are the units for move velocity?", "session": "abc"}),
    )
    .await;
    assert_eq!(status, StatusCode::OK);
    assert_eq!(body["answer"], "move velocity: m/s");
    assert_eq!(body["kind"], "answered");
    assert_eq!(body["intent"], "units");
    assert_eq!(body["session"], "abc");
    for field in ["confidence", "suggestions", "feedback_id", "latency_ms"] {
        assert!(body.get(field).is_some(), "missing {field}");
    }
}

#[tokio::test]
async fn bad_ask_bodies_are_rejected() {
    let (base, _) = ready(None).await;
    let client = Client::new();
    let (status, _) = ask(&client, &base, json!({"question": ""})).await;
    assert_eq!(status, StatusCode::BAD_REQUEST);
    let (status, _) = ask(&client, &base, json!({"question": "   "})).await;
    assert_eq!(status, StatusCode::BAD_REQUEST);
    let long = "a".repeat(MAX_QUESTION_CHARS + 1);
    let (status, _) = ask(&client, &base, json!({ "question": long })).await;
    assert_eq!(status, StatusCode::BAD_REQUEST);
    let (status, _) = ask(&client, &base, json!({"q": "x"})).await;
    assert_eq!(status, StatusCode::BAD_REQUEST);
    let r = client
        .post(format!("{base}/v1/ask"))
        .header("content-type", "application/json")
        .body("{not json")
        .send()
        .await
        .unwrap();
    assert_eq!(r.status(), StatusCode::BAD_REQUEST);
}

#[tokio::test]
async fn feedback_lifecycle() {
    let (base, _) = ready(None).await;
    let client = Client::new();
    let (_, body) = ask(&client, &base, json!({"question": "How do I get started?"})).await;
    let id = body["feedback_id"].as_str().unwrap().to_string();
    let post = |b: Value| client.post(format!("{base}/v1/feedback")).json(&b).send();

    assert_eq!(
        post(json!({"feedback_id": id, "helpful": "maybe"}))
            .await
            .unwrap()
            .status(),
        StatusCode::BAD_REQUEST
    );
    assert_eq!(
        post(json!({"feedback_id": id, "helpful": "yes"}))
            .await
            .unwrap()
            .status(),
        StatusCode::NO_CONTENT
    );
    assert_eq!(
        post(json!({"feedback_id": id, "helpful": "no"}))
            .await
            .unwrap()
            .status(),
        StatusCode::CONFLICT
    );
    assert_eq!(
        post(json!({"feedback_id": "nope", "helpful": "no"}))
            .await
            .unwrap()
            .status(),
        StatusCode::NOT_FOUND
    );
    let m: Value = client
        .get(format!("{base}/v1/metrics"))
        .send()
        .await
        .unwrap()
        .json()
        .await
        .unwrap();
    assert_eq!(m["feedback_yes"], 1);
    assert_eq!(m["feedback_no"], 0);
}

#[tokio::test]
async fn counters_obey_their_laws() {
    let (base, _) = ready(None).await;
    let client = Client::new();
    let questions = [
        "What is the goal of VERA?",
        "Who won the world cup?",
        "What is logistic growth?",
        "What is the meaning of life?",
        "Is Chrome supported?",
    ];
    for q in questions {
        let (status, _) = ask(&client, &base, json!({ "question": q })).await;
        assert_eq!(status, StatusCode::OK);
    }
    let (status, _) = ask(&client, &base, json!({"question": ""})).await;
    assert_eq!(status, StatusCode::BAD_REQUEST);
    let m: Value = client
        .get(format!("{base}/v1/metrics"))
        .send()
        .await
        .unwrap()
        .json()
        .await
        .unwrap();
    assert_eq!(m["asks"], 5);
    assert_eq!(
        m["answered"].as_u64().unwrap() + m["idk"].as_u64().unwrap(),
        5
    );
    assert_eq!(m["idk"], 2);
}

#[tokio::test]
async fn retrain_requires_the_admin_token() {
    let (base, _) = ready(None).await;
    let client = Client::new();
    let url = format!("{base}/v1/admin/retrain");
    assert_eq!(
        client.post(&url).send().await.unwrap().status(),
        StatusCode::UNAUTHORIZED
    );
    let wrong = client.post(&url).bearer_auth("nope").send().await.unwrap();
    assert_eq!(wrong.status(), StatusCode::UNAUTHORIZED);

    let before: Value = client
        .get(format!("{base}/v1/health"))
        .send()
        .await
        .unwrap()
        .json()
        .await
        .unwrap();
    let r = client.post(&url).bearer_auth(TOKEN).send().await.unwrap();
    assert_eq!(r.status(), StatusCode::OK);
    let summary: Value = r.json().await.unwrap();
    assert_eq!(summary["previous_version"], 1);
    assert_eq!(summary["new_version"], 2);
    assert_eq!(summary["intents"], 7);
    let r = client
        .post(&url)
        .header("x-admin-token", TOKEN)
        .send()
        .await
        .unwrap();
    assert_eq!(r.status(), StatusCode::OK);
    let after: Value = client
        .get(format!("{base}/v1/health"))
        .send()
        .await
        .unwrap()
        .json()
        .await
        .unwrap();
    assert_eq!(after["status"], "ready");
    assert_eq!(after["model_version"], 3);
    assert_eq!(after["model_fingerprint"], before["model_fingerprint"]);
}

#[tokio::test]
async fn retrain_picks_up_labeled_questions() {
    let dir = tempfile::tempdir().unwrap();
    let (base, state) = ready(Some(dir.path().to_path_buf())).await;
    let client = Client::new();
    let missed = common::missed_five();
    for m in &missed {
        let (_, body) = ask(&client, &base, json!({ "question": m.question })).await;
        assert_eq!(body["kind"], "idk", "{}", m.question);
    }
    let log = std::fs::read_to_string(dir.path().join(MISSED_FILE)).unwrap();
    assert_eq!(log.lines().count(), 5);

    std::fs::copy(
        common::fixture("missed_5.jsonl"),
        dir.path().join(service::LABELED_FILE),
    )
    .unwrap();
    let r = client
        .post(format!("{base}/v1/admin/retrain"))
        .bearer_auth(TOKEN)
        .send()
        .await
        .unwrap();
    assert_eq!(r.status(), StatusCode::OK);
    assert_eq!(
        state.snapshot().unwrap().model.example_count(),
        common::bundle().corpus.len() + 5
    );
    for m in &missed {
        let (_, body) = ask(&client, &base, json!({ "question": m.question })).await;
        assert_eq!(body["kind"], "answered", "{}", m.question);
    }
}

#[tokio::test]
async fn broken_templates_keep_the_old_snapshot() {
    let dir = tempfile::tempdir().unwrap();
    let templates = dir.path().join("templates.json");
    std::fs::copy(common::data("templates.json"), &templates).unwrap();
    let mut cfg = config(None);
    cfg.templates_path = Some(templates.clone());
    let state = Arc::new(ServiceState::new(cfg).unwrap());
    state.rebuild().unwrap();
    let base = start(state.clone()).await;
    std::fs::write(&templates, "[{\"id\": 1}]").unwrap();
    let client = Client::new();
    let r = client
        .post(format!("{base}/v1/admin/retrain"))
        .bearer_auth(TOKEN)
        .send()
        .await
        .unwrap();
    assert_eq!(r.status(), StatusCode::INTERNAL_SERVER_ERROR);
    let body: Value = r.json().await.unwrap();
    assert!(body["error"].is_string());
    assert_eq!(state.snapshot().unwrap().version, 1);
    let (status, _) = ask(
        &client,
        &base,
        json!({"question": "What is the goal of VERA?"}),
    )
    .await;
    assert_eq!(status, StatusCode::OK);
}

#[tokio::test(flavor = "multi_thread", worker_threads = 4)]
async fn retrain_under_load_fails_no_request() {
    let (base, _) = ready(None).await;
    let client = Client::new();
    let mut tasks = Vec::new();
    for i in 0..100 {
        let client = client.clone();
        let base = base.clone();
        tasks.push(tokio::spawn(async move {
            let q = if i % 2 == 0 {
                "What is the goal of VERA?"
            } else {
                "Who won the world cup?"
            };
            ask(&client, &base, json!({ "question": q })).await.0
        }));
    }
    let retrain = client
        .post(format!("{base}/v1/admin/retrain"))
        .bearer_auth(TOKEN)
        .send()
        .await
        .unwrap();
    assert_eq!(retrain.status(), StatusCode::OK);
    for t in tasks {
        assert_eq!(t.await.unwrap(), StatusCode::OK);
    }
}

#[tokio::test]
async fn cors_allows_the_configured_origin() {
    let (base, _) = ready(None).await;
    let client = Client::new();
    let r = client
        .get(format!("{base}/v1/health"))
        .header("origin", "http://localhost:5173")
        .send()
        .await
        .unwrap();
    assert_eq!(
        r.headers().get("access-control-allow-origin").unwrap(),
        "http://localhost:5173"
    );
    let r = client
        .get(format!("{base}/v1/health"))
        .header("origin", "http://evil.example")
        .send()
        .await
        .unwrap();
    assert!(r.headers().get("access-control-allow-origin").is_none());
}
