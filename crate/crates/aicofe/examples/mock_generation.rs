//! Fan-out to three mock providers with the validate-and-regenerate loop.

use std::sync::Arc;

use aicofe::EmailGuard;
use aicofe_core::model::Language;
use aicofe_core::prompt::PromptBundle;
use aicofe_core::validation::ValidationPolicy;
use aicofe_gateway::mock::{template_feedback, MockBehavior, MockProvider, ScriptStep};
use aicofe_gateway::{mock_descriptors, Gateway, Provider};

const PROMPT: &str = "Puntuaciones medias por ítem de la rúbrica (1–5):\n\
- Voz y dicción: 4.3 (n=3)\n- Estructura: 2.7 (n=3)\n- Diapositivas: 4.3 (n=3)\n\n\
Redacta el feedback en español en exactamente tres párrafos.";

#[tokio::main]
async fn main() -> anyhow::Result<()> {
    let bundle = PromptBundle {
        instance_id: "i1".into(),
        rendered_text: PROMPT.into(),
        template_id: "demo".into(),
        inputs_digest: "demo".into(),
        redaction_map_id: "redaction-i1".into(),
        truncations: vec![],
    };
    let mut descriptors = mock_descriptors(100).into_iter();
    let mut providers: Vec<Arc<dyn Provider>> = Vec::new();
    // The first mock answers too briefly twice before producing a usable text.
    providers.push(Arc::new(MockProvider::new(
        descriptors.next().unwrap(),
        MockBehavior::Scripted(vec![
            ScriptStep::Text("Bien.".into()),
            ScriptStep::Text("Bien.\n\nMejorar.\n\nPracticar.".into()),
            ScriptStep::Text(template_feedback(PROMPT, 7)),
        ]),
    )));
    for d in descriptors {
        providers.push(Arc::new(MockProvider::from_descriptor(d)));
    }
    let gateway = Gateway::new(providers)?.with_guard(Arc::new(EmailGuard));
    let policy = ValidationPolicy::new(Language::Es);

    let started = std::time::Instant::now();
    let outcomes = gateway.generate_validated(&bundle, &policy, None).await?;
    println!("{} providers in {} ms", outcomes.len(), started.elapsed().as_millis());
    for o in &outcomes {
        println!(
            "{:<12} passed={} regenerations={} calls={} words={}",
            o.result.provider_id,
            o.passed(),
            o.regenerations,
            o.provider_calls,
            o.result.raw_text.split_whitespace().count()
        );
    }
    Ok(())
}
