//! Starts the HTTP API on a random port and walks the workflow with a client.

use std::future::IntoFuture;
use std::sync::Arc;

use aicofe::{api, demo_service, fixtures, Settings};
use serde_json::{json, Value};

#[tokio::main]
async fn main() -> anyhow::Result<()> {
    let files = tempfile::tempdir()?;
    let svc = Arc::new(demo_service(files.path(), 0, Settings::default())?);
    let listener = tokio::net::TcpListener::bind("127.0.0.1:0").await?;
    let base = format!("http://{}", listener.local_addr()?);
    tokio::spawn(axum::serve(listener, api::router(svc)).into_future());

    let http = reqwest::Client::new();
    let call = |method: reqwest::Method, path: &str, who: &str| {
        http.request(method, format!("{base}{path}")).bearer_auth(fixtures::token_for(who))
    };

    for (who, sub) in fixtures::evaluations() {
        let r = call(reqwest::Method::POST, "/evaluations", who).json(&sub).send().await?;
        println!("POST /evaluations as {who}: {}", r.status());
    }
    let report: Value = call(reqwest::Method::POST, "/instances/i1/generate", "t1").send().await?.json().await?;
    let first = report["candidates"][0]["candidate_id"].as_str().unwrap_or_default().to_owned();
    println!("generated {} candidates", report["candidates"].as_array().map_or(0, Vec::len));

    let draft: Value = call(reqwest::Method::POST, "/instances/i1/compose", "t1")
        .json(&json!({ "selections": [{ "candidate_id": first, "paragraph": 0 }] }))
        .send()
        .await?
        .json()
        .await?;
    let id = draft["id"].as_str().unwrap_or_default().to_owned();
    let sent = call(reqwest::Method::POST, &format!("/drafts/{id}/send"), "t1")
        .header("Idempotency-Key", "demo-1")
        .send()
        .await?;
    println!("send {id}: {}", sent.status());

    let peek = call(reqwest::Method::GET, "/instances/i1/student-view", "s2").send().await?;
    println!("another student reading the view: {}", peek.status());
    let view: Value = call(reqwest::Method::GET, "/instances/i1/student-view", "s1").send().await?.json().await?;
    println!("subject sees: {}", view["feedback"][0]["display_text"]);
    Ok(())
}
