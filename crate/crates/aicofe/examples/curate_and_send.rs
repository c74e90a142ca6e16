//! The teacher's side: generate, pick sentences, edit one, send, then the student's view.

use aicofe::workflow::{ComposeRequest, EditRequest, RatingRequest};
use aicofe::{demo_service, fixtures, Settings};
use aicofe_core::curation::Selection;
use aicofe_core::model::UserId;

#[tokio::main]
async fn main() -> anyhow::Result<()> {
    let files = tempfile::tempdir()?;
    let svc = demo_service(files.path(), 0, Settings::default())?;
    fixtures::seed_evaluations(&svc)?;
    let teacher = svc.user(&UserId::new(fixtures::TEACHER))?;
    let student = svc.user(&UserId::new(fixtures::SUBJECT))?;
    let inst = fixtures::INSTANCE.into();

    let report = svc.generate(&teacher, &inst).await?;
    for c in &report.candidates {
        println!("{:<24} passed={} sentences={}", c.candidate_id, c.passed, c.sentence_count);
    }

    let cands = svc.candidates(&teacher, &inst)?;
    let (gpt, gemini, llama) = (&cands[0].candidate, &cands[1].candidate, &cands[2].candidate);
    let selections = vec![
        Selection::Paragraph { candidate_id: gpt.id.clone(), paragraph: 0 },
        Selection::Paragraph { candidate_id: gemini.id.clone(), paragraph: 1 },
        Selection::Sentence { candidate_id: llama.id.clone(), sentence_id: llama.paragraphs[2][0].id.clone() },
        Selection::TeacherText { teacher_text: "Nos vemos en la próxima sesión para repasarlo juntos.".into() },
    ];
    let draft = svc.compose(&teacher, &inst, ComposeRequest { selections, allow_unpassed: false })?;
    println!("\ndraft v{} {:?}", draft.feedback.version, draft.percentages);

    let first = draft.feedback.sentences[0].clone();
    let edited = svc.edit(
        &teacher,
        &inst,
        draft.feedback.version,
        EditRequest { sentence_id: first.id, text: format!("{} ¡Enhorabuena!", first.text) },
    )?;
    println!(
        "edited v{} {:?} modification extent {:.3}",
        edited.feedback.version, edited.percentages, edited.feedback.breakdown.teacher_modification_extent
    );

    let sent = svc.send(&teacher, &inst, edited.feedback.version)?;
    println!("\nsent {} at {:?}\n{}", sent.feedback.id, sent.feedback.sent_at, sent.display_text);

    let view = svc.student_view(&student, &inst)?;
    println!("\nstudent sees {} sent version(s); self comparison {:?}", view.feedback.len(), view.self_comparison.as_ref().map(|c| c.len()));
    svc.rate(&student, &inst, RatingRequest { version: sent.feedback.version, agreement: 4, usefulness: 5, comment: None })?;
    for h in svc.instance_history(&teacher, &inst)? {
        println!("history: v{} rating {:?}", h.version, h.rating.map(|r| (r.agreement, r.usefulness)));
    }
    Ok(())
}
