#![allow(dead_code)]

use std::sync::Arc;

use aicofe::{api, demo_service, Service, Settings};
use axum::body::Body;
use axum::http::{Method, Request, StatusCode};
use axum::Router;
use serde_json::Value;
use tower::ServiceExt;

pub struct App {
    pub svc: Arc<Service>,
    pub router: Router,
    _files: tempfile::TempDir,
}

pub fn app_with(latency_ms: u64, settings: Settings) -> App {
    let files = tempfile::tempdir().unwrap();
    let svc = Arc::new(demo_service(files.path(), latency_ms, settings).unwrap());
    App {
        router: api::router(svc.clone()),
        svc,
        _files: files,
    }
}

pub fn app() -> App {
    app_with(0, Settings::default())
}

pub struct Reply {
    pub status: StatusCode,
    pub body: Value,
}

impl App {
    pub async fn call(&self, method: Method, path: &str, token: Option<&str>, body: Option<Value>) -> Reply {
        self.call_with(method, path, token, body, &[]).await
    }

    pub async fn call_with(
        &self,
        method: Method,
        path: &str,
        token: Option<&str>,
        body: Option<Value>,
        headers: &[(&str, &str)],
    ) -> Reply {
        let mut req = Request::builder().method(method).uri(path);
        if let Some(t) = token {
            req = req.header("authorization", format!("Bearer {t}"));
        }
        for (k, v) in headers {
            req = req.header(*k, *v);
        }
        let req = match body {
            Some(b) => req
                .header("content-type", "application/json")
                .body(Body::from(serde_json::to_vec(&b).unwrap())),
            None => req.body(Body::empty()),
        }
        .unwrap();
        let resp = self.router.clone().oneshot(req).await.unwrap();
        let status = resp.status();
        let bytes = axum::body::to_bytes(resp.into_body(), usize::MAX).await.unwrap();
        let body = serde_json::from_slice(&bytes).unwrap_or(Value::Null);
        Reply { status, body }
    }

    pub async fn as_user(&self, method: Method, path: &str, user: &str, body: Option<Value>) -> Reply {
        self.call(method, path, Some(aicofe::fixtures::token_for(user)), body).await
    }

    /// Submits the four demo evaluations over HTTP.
    pub async fn submit_demo_evaluations(&self) {
        for (who, sub) in aicofe::fixtures::evaluations() {
            let r = self
                .as_user(Method::POST, "/evaluations", who, Some(serde_json::to_value(&sub).unwrap()))
                .await;
            assert_eq!(r.status, StatusCode::CREATED, "{who}: {}", r.body);
        }
    }
}
