//! Records provider responses once, then replays them offline.

use std::sync::Arc;

use aicofe_core::prompt::PromptBundle;
use aicofe_gateway::mock::MockProvider;
use aicofe_gateway::replay::{RecordingProvider, ReplayProvider};
use aicofe_gateway::{mock_descriptors, Gateway, Provider};

#[tokio::main]
async fn main() -> anyhow::Result<()> {
    let dir = tempfile::tempdir()?;
    let bundle = PromptBundle {
        instance_id: "i1".into(),
        rendered_text: "Average scores per rubric item (1–5):\n- Voice: 4.0 (n=3)\n\nWrite three paragraphs.".into(),
        template_id: "demo".into(),
        inputs_digest: "demo".into(),
        redaction_map_id: "redaction-i1".into(),
        truncations: vec![],
    };

    let recording: Vec<Arc<dyn Provider>> = mock_descriptors(0)
        .into_iter()
        .map(|d| Arc::new(RecordingProvider::new(Arc::new(MockProvider::from_descriptor(d)), dir.path())) as Arc<dyn Provider>)
        .collect();
    let live = Gateway::new(recording)?.generate_all(&bundle).await?;

    let replaying: Vec<Arc<dyn Provider>> = mock_descriptors(0)
        .into_iter()
        .map(|d| Arc::new(ReplayProvider::new(d, dir.path())) as Arc<dyn Provider>)
        .collect();
    let replayed = Gateway::new(replaying)?.generate_all(&bundle).await?;

    for (a, b) in live.iter().zip(&replayed) {
        println!("{:<12} identical: {}", a.provider_id, a.raw_text == b.raw_text);
    }
    Ok(())
}
