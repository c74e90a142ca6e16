use std::path::PathBuf;
use std::sync::Arc;

use aicofe_core::curation::FeedbackSource;
use aicofe_gateway::mock::{MockBehavior, MockProvider};
use aicofe_gateway::replay::{fixture_path, Fixture, RecordingProvider, ReplayProvider};
use aicofe_gateway::{provider_call, Endpoint, Outcome, Provider, ProviderDescriptor};

const CAPTURED_PROMPT: &str = "Average scores per rubric item (1–5):\n- Voz: 4.0 (n=3)\n\nRedacta el feedback en español en exactamente tres párrafos";

fn fixtures_dir() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures")
}

fn descriptor(id: &str) -> ProviderDescriptor {
    ProviderDescriptor::new(id, FeedbackSource::Gpt, Endpoint::Replay { dir: "unused".into() })
}

#[tokio::test]
async fn replay_returns_the_captured_response_byte_for_byte() {
    let path = fixture_path(&fixtures_dir(), "gpt-4.1-mini", CAPTURED_PROMPT);
    let fixture: Fixture = serde_json::from_slice(&std::fs::read(&path).unwrap()).unwrap();
    let p = ReplayProvider::new(descriptor("gpt-4.1-mini"), fixtures_dir());
    let r = provider_call(&p, &"i".into(), CAPTURED_PROMPT, None).await;
    assert_eq!(r.outcome, Outcome::Ok);
    assert_eq!(r.raw_text.as_bytes(), fixture.response.as_bytes());
}

#[tokio::test]
async fn unknown_prompt_has_no_fixture() {
    let p = ReplayProvider::new(descriptor("gpt-4.1-mini"), fixtures_dir());
    assert!(p.complete("never recorded").await.is_err());
}

#[tokio::test]
async fn record_then_replay() {
    let dir = tempfile::tempdir().unwrap();
    let inner: Arc<dyn Provider> = Arc::new(MockProvider::new(
        descriptor("rec"),
        MockBehavior::Canned("Primera.\n\n«Segunda» — con acentos.\n\nTercera.".into()),
    ));
    let recorder = RecordingProvider::new(inner, dir.path());
    let live = recorder.complete("prompt p").await.unwrap();
    let replayed = ReplayProvider::new(descriptor("rec"), dir.path()).complete("prompt p").await.unwrap();
    assert_eq!(live, replayed);
    assert!(fixture_path(dir.path(), "rec", "prompt p").exists());
}
