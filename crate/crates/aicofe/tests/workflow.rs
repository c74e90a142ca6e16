use std::sync::Arc;

use aicofe::workflow::{ComposeRequest, EditRequest};
use aicofe::{fixtures, demo_service, AppError, EmailGuard, Service, Settings};
use aicofe_core::curation::{FeedbackSource, Selection};
use aicofe_core::model::{InstanceStatus, SentenceId, User, UserId};
use aicofe_gateway::ProviderError;
use aicofe_gateway::mock::{template_feedback, MockBehavior, MockProvider, ScriptStep};
use aicofe_gateway::{mock_descriptors, Gateway, Provider};
use aicofe_store::JobStatus;

const ES_PROMPT: &str = "- Voz y dicción: 3.5 (n=2)\nRedacta el feedback en español.";

fn teacher(svc: &Service) -> User {
    svc.user(&UserId::new(fixtures::TEACHER)).unwrap()
}

fn scripted(files: &tempfile::TempDir, steps: Vec<ScriptStep>) -> Service {
    let mock = MockProvider::new(mock_descriptors(0).remove(0), MockBehavior::Scripted(steps));
    let gateway = Gateway::new(vec![Arc::new(mock) as Arc<dyn Provider>]).unwrap().with_guard(Arc::new(EmailGuard));
    let svc = Service::ephemeral(files.path(), gateway, Settings::default()).unwrap();
    fixtures::seed_base(&svc).unwrap();
    fixtures::seed_evaluations(&svc).unwrap();
    svc
}

async fn curating(files: &tempfile::TempDir) -> Service {
    let svc = demo_service(files.path(), 0, Settings::default()).unwrap();
    fixtures::seed_evaluations(&svc).unwrap();
    svc.generate(&teacher(&svc), &fixtures::INSTANCE.into()).await.unwrap();
    svc
}

fn first_paragraph(svc: &Service) -> ComposeRequest {
    let cands = svc.candidates(&teacher(svc), &fixtures::INSTANCE.into()).unwrap();
    ComposeRequest {
        selections: vec![Selection::Paragraph { candidate_id: cands[0].candidate.id.clone(), paragraph: 0 }],
        allow_unpassed: false,
    }
}

#[tokio::test]
async fn failed_generation_is_recorded_and_retryable() {
    let files = tempfile::tempdir().unwrap();
    let valid = template_feedback(ES_PROMPT, 1);
    let svc = scripted(&files, vec![ScriptStep::Fail(ProviderError::MissingCredential("KEY".into())), ScriptStep::Text(valid)]);
    let t = teacher(&svc);
    let inst = fixtures::INSTANCE.into();

    let err = svc.generate(&t, &inst).await.unwrap_err();
    assert!(matches!(err, AppError::Generation { .. }), "{err:?}");
    let (job, _) = svc.generation_status(&t, &inst).unwrap().unwrap();
    assert_eq!(job.status, JobStatus::Failed);
    assert_eq!(svc.instance(&inst).unwrap().status, InstanceStatus::Generating);

    let report = svc.generate(&t, &inst).await.unwrap();
    assert_eq!(report.candidates.len(), 1);
    assert!(report.candidates[0].passed);
    assert_eq!(svc.instance(&inst).unwrap().status, InstanceStatus::Curating);
    let jobs = svc.store().db.read(|r| r.jobs_for(&inst)).unwrap();
    assert_eq!(jobs.len(), 2);
}

#[tokio::test]
async fn generation_cannot_restart_once_curating() {
    let files = tempfile::tempdir().unwrap();
    let svc = curating(&files).await;
    let err = svc.generate(&teacher(&svc), &fixtures::INSTANCE.into()).await.unwrap_err();
    assert!(matches!(err, AppError::Conflict { .. }), "{err:?}");
}

#[tokio::test]
async fn composing_before_generation_conflicts() {
    let files = tempfile::tempdir().unwrap();
    let svc = demo_service(files.path(), 0, Settings::default()).unwrap();
    let req = ComposeRequest { selections: vec![Selection::TeacherText { teacher_text: "Hola.".into() }], allow_unpassed: false };
    let err = svc.compose(&teacher(&svc), &fixtures::INSTANCE.into(), req).unwrap_err();
    assert!(matches!(err, AppError::Conflict { .. }), "{err:?}");
}

#[tokio::test]
async fn students_cannot_curate() {
    let files = tempfile::tempdir().unwrap();
    let svc = curating(&files).await;
    let student = svc.user(&UserId::new("s2")).unwrap();
    let err = svc.compose(&student, &fixtures::INSTANCE.into(), first_paragraph(&svc)).unwrap_err();
    assert!(matches!(err, AppError::Forbidden { .. }), "{err:?}");
}

#[tokio::test]
async fn edits_make_new_versions_and_keep_the_parent() {
    let files = tempfile::tempdir().unwrap();
    let svc = curating(&files).await;
    let t = teacher(&svc);
    let inst = fixtures::INSTANCE.into();
    let v1 = svc.compose(&t, &inst, first_paragraph(&svc)).unwrap();
    let original = v1.feedback.sentences[0].text.clone();
    let edit = EditRequest { sentence_id: SentenceId::new("s1"), text: format!("{original} Sigue así.") };
    let v2 = svc.edit(&t, &inst, 1, edit).unwrap();
    assert_eq!(v2.feedback.version, 2);
    assert!(v2.feedback.breakdown.teacher_modification_extent > 0.0);
    assert!(v2.feedback.breakdown.proportions[&FeedbackSource::Teacher] > 0.0);

    let versions = svc.versions(&t, &inst).unwrap();
    assert_eq!(versions.iter().map(|v| v.feedback.version).collect::<Vec<_>>(), vec![2, 1]);
    assert_eq!(versions[1].feedback.sentences[0].text, original);
}

#[tokio::test]
async fn sent_versions_are_frozen_and_recomposing_reopens_curation() {
    let files = tempfile::tempdir().unwrap();
    let svc = curating(&files).await;
    let t = teacher(&svc);
    let inst = fixtures::INSTANCE.into();
    svc.compose(&t, &inst, first_paragraph(&svc)).unwrap();
    svc.send(&t, &inst, 1).unwrap();
    assert_eq!(svc.instance(&inst).unwrap().status, InstanceStatus::Sent);

    let again = svc.send(&t, &inst, 1).unwrap_err();
    assert!(matches!(again, AppError::Conflict { .. }), "{again:?}");
    let edit = EditRequest { sentence_id: SentenceId::new("s1"), text: "Otro texto.".into() };
    let err = svc.edit(&t, &inst, 1, edit).unwrap_err();
    assert!(matches!(err, AppError::Conflict { .. }), "{err:?}");

    let v2 = svc.compose(&t, &inst, first_paragraph(&svc)).unwrap();
    assert_eq!(v2.feedback.version, 2);
    assert_eq!(svc.instance(&inst).unwrap().status, InstanceStatus::Curating);
    svc.send(&t, &inst, 2).unwrap();
    let history = svc.instance_history(&t, &inst).unwrap();
    assert_eq!(history.len(), 2);
}

#[tokio::test]
async fn restricted_terms_block_sending() {
    let files = tempfile::tempdir().unwrap();
    let svc = curating(&files).await;
    let t = teacher(&svc);
    let inst = fixtures::INSTANCE.into();
    let req = ComposeRequest {
        selections: vec![Selection::TeacherText { teacher_text: "La conclusión fue inútil.".into() }],
        allow_unpassed: false,
    };
    svc.compose(&t, &inst, req).unwrap();
    let err = svc.send(&t, &inst, 1).unwrap_err();
    assert!(matches!(err, AppError::Invalid { .. }), "{err:?}");
    assert_eq!(svc.instance(&inst).unwrap().status, InstanceStatus::Curating);
}

#[tokio::test]
async fn unpassed_candidates_need_an_explicit_override() {
    let files = tempfile::tempdir().unwrap();
    let svc = scripted(&files, vec![ScriptStep::Text("Bien.".into())]);
    let t = teacher(&svc);
    let inst = fixtures::INSTANCE.into();
    let report = svc.generate(&t, &inst).await.unwrap();
    assert!(!report.candidates[0].passed);
    let cid = report.candidates[0].candidate_id.clone();
    let mut req = ComposeRequest {
        selections: vec![Selection::Paragraph { candidate_id: cid.into(), paragraph: 0 }],
        allow_unpassed: false,
    };
    assert!(svc.compose(&t, &inst, req.clone()).is_err());
    req.allow_unpassed = true;
    let draft = svc.compose(&t, &inst, req).unwrap();
    assert!(draft.feedback.override_unpassed);
}

#[tokio::test]
async fn storage_stays_consistent_after_a_full_cycle() {
    let files = tempfile::tempdir().unwrap();
    let svc = curating(&files).await;
    let t = teacher(&svc);
    let inst = fixtures::INSTANCE.into();
    svc.compose(&t, &inst, first_paragraph(&svc)).unwrap();
    svc.send(&t, &inst, 1).unwrap();
    let report = svc.store().audit().unwrap();
    assert!(report.clean, "{report:?}");
}
