use std::sync::atomic::{AtomicU32, Ordering};
use std::sync::{Arc, Mutex};

use aicofe_core::curation::FeedbackSource;
use aicofe_gateway::{build_provider, provider_call, Backoff, Endpoint, Outcome, ProviderDescriptor, ProviderError};
use axum::extract::State;
use axum::http::{HeaderMap, StatusCode};
use axum::routing::post;
use axum::{Json, Router};
use serde_json::{json, Value};

#[derive(Clone, Default)]
struct Seen {
    bodies: Arc<Mutex<Vec<Value>>>,
    headers: Arc<Mutex<Vec<HeaderMap>>>,
    hits: Arc<AtomicU32>,
}

async fn serve(router: Router) -> String {
    let listener = tokio::net::TcpListener::bind("127.0.0.1:0").await.unwrap();
    let addr = listener.local_addr().unwrap();
    tokio::spawn(async move { axum::serve(listener, router).await.unwrap() });
    format!("http://{addr}")
}

fn quick(mut d: ProviderDescriptor) -> ProviderDescriptor {
    d.backoff = Backoff {
        base_ms: 1,
        factor: 2.0,
        max_ms: 4,
    };
    d.timeout_ms = 2000;
    d
}

#[tokio::test]
async fn openai_chat_completion() {
    std::env::set_var("AICOFE_TEST_OPENAI_KEY", "sk-test");
    let seen = Seen::default();
    let app = Router::new()
        .route(
            "/v1/chat/completions",
            post(|State(s): State<Seen>, headers: HeaderMap, Json(body): Json<Value>| async move {
                s.bodies.lock().unwrap().push(body);
                s.headers.lock().unwrap().push(headers);
                Json(json!({"choices": [{"message": {"role": "assistant", "content": "Hola.\n\nBien.\n\nPlan."}}]}))
            }),
        )
        .with_state(seen.clone());
    let base = serve(app).await;
    let d = quick(ProviderDescriptor::new(
        "gpt-4.1-mini",
        FeedbackSource::Gpt,
        Endpoint::OpenAi {
            base_url: base,
            model: "gpt-4.1-mini".into(),
            api_key_env: "AICOFE_TEST_OPENAI_KEY".into(),
            temperature: 0.2,
            max_output_tokens: 600,
        },
    ));
    let p = build_provider(d, reqwest::Client::new()).unwrap();
    assert_eq!(p.complete("the prompt").await.unwrap(), "Hola.\n\nBien.\n\nPlan.");
    let body = seen.bodies.lock().unwrap()[0].clone();
    assert_eq!(body["model"], "gpt-4.1-mini");
    assert_eq!(body["messages"][0]["content"], "the prompt");
    assert_eq!(body["max_tokens"], 600);
    let auth = seen.headers.lock().unwrap()[0]["authorization"].to_str().unwrap().to_owned();
    assert_eq!(auth, "Bearer sk-test");
}

#[tokio::test]
async fn gemini_generate_content() {
    std::env::set_var("AICOFE_TEST_GEMINI_KEY", "g-test");
    let seen = Seen::default();
    let app = Router::new()
        .route(
            "/v1beta/models/:model",
            post(|State(s): State<Seen>, headers: HeaderMap, Json(body): Json<Value>| async move {
                s.bodies.lock().unwrap().push(body);
                s.headers.lock().unwrap().push(headers);
                Json(json!({"candidates": [{"content": {"parts": [{"text": "Part one "}, {"text": "and two."}]}}]}))
            }),
        )
        .with_state(seen.clone());
    let base = serve(app).await;
    let d = quick(ProviderDescriptor::new(
        "gemini-2.5-flash",
        FeedbackSource::Gemini,
        Endpoint::Gemini {
            base_url: base,
            model: "gemini-2.5-flash".into(),
            api_key_env: "AICOFE_TEST_GEMINI_KEY".into(),
            temperature: 0.7,
            max_output_tokens: 1024,
        },
    ));
    let p = build_provider(d, reqwest::Client::new()).unwrap();
    assert_eq!(p.complete("hi").await.unwrap(), "Part one and two.");
    assert_eq!(seen.bodies.lock().unwrap()[0]["contents"][0]["parts"][0]["text"], "hi");
    assert_eq!(seen.headers.lock().unwrap()[0]["x-goog-api-key"], "g-test");
}

#[tokio::test]
async fn server_errors_are_retried_and_rate_limits_mapped() {
    let seen = Seen::default();
    let app = Router::new()
        .route(
            "/v1/chat/completions",
            post(|State(s): State<Seen>| async move {
                match s.hits.fetch_add(1, Ordering::SeqCst) {
                    0 => (StatusCode::SERVICE_UNAVAILABLE, Json(json!({"error": "busy"}))),
                    1 => (StatusCode::TOO_MANY_REQUESTS, Json(json!({"error": "slow down"}))),
                    _ => (StatusCode::OK, Json(json!({"choices": [{"message": {"content": "done"}}]}))),
                }
            }),
        )
        .with_state(seen.clone());
    let base = serve(app).await;
    let d = quick(ProviderDescriptor::new(
        "llama-3.1",
        FeedbackSource::Llama,
        Endpoint::OpenAiCompatible {
            base_url: base,
            model: "llama3.1".into(),
            api_key_env: None,
            temperature: 0.7,
            max_output_tokens: 512,
        },
    ));
    let p = build_provider(d, reqwest::Client::new()).unwrap();
    let r = provider_call(p.as_ref(), &"i".into(), "prompt", None).await;
    assert_eq!((r.outcome, r.attempt, r.raw_text.as_str()), (Outcome::Ok, 3, "done"));
}

#[tokio::test]
async fn missing_credentials_and_malformed_bodies() {
    let app = Router::new().route("/v1/chat/completions", post(|| async { Json(json!({"unexpected": true})) }));
    let base = serve(app).await;
    let endpoint = |key: &str| Endpoint::OpenAi {
        base_url: base.clone(),
        model: "m".into(),
        api_key_env: key.into(),
        temperature: 0.7,
        max_output_tokens: 10,
    };
    let p = build_provider(quick(ProviderDescriptor::new("x", FeedbackSource::Gpt, endpoint("AICOFE_TEST_UNSET_KEY"))), reqwest::Client::new())
        .unwrap();
    assert_eq!(
        p.complete("p").await,
        Err(ProviderError::MissingCredential("AICOFE_TEST_UNSET_KEY".into()))
    );
    std::env::set_var("AICOFE_TEST_MALFORMED_KEY", "k");
    let p = build_provider(quick(ProviderDescriptor::new("y", FeedbackSource::Gpt, endpoint("AICOFE_TEST_MALFORMED_KEY"))), reqwest::Client::new())
        .unwrap();
    assert!(matches!(p.complete("p").await, Err(ProviderError::Malformed(_))));
}
