//! Relational constraints, atomic submission and query round-trips.

mod common;

use std::collections::BTreeMap;

use aicofe_core::model::{
    Evaluation, EvaluatorKind, InstanceStatus, InteractionEvent, InteractionKind, Language, Role,
};
use aicofe_core::preprocess::{CharacterPolicy, ScreenedComment};
use aicofe_core::validation::ValidationPolicy;
use aicofe_store::{JobStatus, StoreError};
use chrono::{DateTime, Duration, Utc};
use common::{rubric, scores, seeded};

fn eval(id: &str, who: &str, kind: EvaluatorKind, s: &[(&str, i32)]) -> Evaluation {
    Evaluation {
        id: id.into(),
        instance_id: "i1".into(),
        evaluator_id: who.into(),
        evaluator_kind: kind,
        item_scores: scores(s),
        item_comments: BTreeMap::new(),
        submitted_at: DateTime::from_timestamp_millis(1_700_000_000_123).unwrap(),
    }
}

fn event(id: &str, eval: &str, ms: i64) -> InteractionEvent {
    InteractionEvent {
        id: id.into(),
        evaluation_id: eval.into(),
        item_id: "voice".into(),
        kind: InteractionKind::ScoreSelected,
        value: Some(3),
        occurred_at: DateTime::from_timestamp_millis(ms).unwrap(),
    }
}

fn is_constraint(r: Result<(), StoreError>) -> bool {
    matches!(r, Err(StoreError::Constraint(_)))
}

#[test]
fn migrations_apply_once() {
    let db = aicofe_store::Database::open_in_memory().unwrap();
    assert_eq!(db.migrate().unwrap(), vec![1]);
    assert!(db.migrate().unwrap().is_empty());
}

#[test]
fn entities_round_trip() {
    let db = seeded();
    db.read(|r| {
        assert_eq!(r.get_rubric(&"r1".into())?, rubric());
        let course = r.get_course(&"c1".into())?;
        assert_eq!(course.language, Language::Es);
        assert!(course.group_ids.contains(&"g1".into()));
        let t = r.get_user(&"t1".into())?;
        assert_eq!(t.role, Role::Teacher);
        assert!(t.course_ids.contains(&"c1".into()));
        assert!(r.get_user(&"s3".into())?.course_ids.contains(&"c1".into()));
        assert_eq!(r.get_group(&"g1".into())?.member_ids.len(), 4);
        assert_eq!(r.course_members(&"c1".into())?.len(), 5);
        assert_eq!(r.get_instance(&"i1".into())?.status, InstanceStatus::Collecting);
        Ok(())
    })
    .unwrap();
}

#[test]
fn out_of_range_scores_are_rejected_by_the_database() {
    let db = seeded();
    for bad in [0, 6, -1, 100] {
        let r = db.write(|r| r.insert_evaluation(&eval("e", "s2", EvaluatorKind::Peer, &[("voice", bad)]), &[], &[]));
        assert!(is_constraint(r), "score {bad}");
    }
    let unknown_item = db.write(|r| r.insert_evaluation(&eval("e", "s2", EvaluatorKind::Peer, &[("nope", 3)]), &[], &[]));
    assert!(is_constraint(unknown_item));
    db.write(|r| r.insert_evaluation(&eval("e", "s2", EvaluatorKind::Peer, &[("voice", 5)]), &[], &[])).unwrap();
}

#[test]
fn score_updates_are_range_checked() {
    let db = seeded();
    db.write(|r| r.insert_evaluation(&eval("e", "s2", EvaluatorKind::Peer, &[("voice", 3)]), &[], &[])).unwrap();
    let r = db.write(|r| {
        r.connection().execute("UPDATE item_scores SET score = 9 WHERE evaluation_id = 'e'", [])?;
        Ok(())
    });
    assert!(is_constraint(r));
}

#[test]
fn self_evaluations_are_unique_and_by_the_subject() {
    let db = seeded();
    let by_peer = db.write(|r| r.insert_evaluation(&eval("x", "s2", EvaluatorKind::SelfAssessment, &[("voice", 3)]), &[], &[]));
    assert!(is_constraint(by_peer));
    db.write(|r| r.insert_evaluation(&eval("a", "s1", EvaluatorKind::SelfAssessment, &[("voice", 3)]), &[], &[])).unwrap();
    let dup = db.write(|r| r.insert_evaluation(&eval("b", "s1", EvaluatorKind::SelfAssessment, &[("voice", 4)]), &[], &[]));
    assert!(is_constraint(dup));
}

#[test]
fn events_must_be_monotonic() {
    let db = seeded();
    let e = eval("e", "s2", EvaluatorKind::Peer, &[("voice", 3)]);
    let r = db.write(|r| r.insert_evaluation(&e, &[], &[event("a", "e", 2_000), event("b", "e", 1_000)]));
    assert!(is_constraint(r));
    db.write(|r| r.insert_evaluation(&e, &[], &[event("a", "e", 1_000), event("b", "e", 1_000), event("c", "e", 3_000)]))
        .unwrap();
    let got = db.read(|r| r.list_events(&"e".into())).unwrap();
    assert_eq!(got.iter().map(|e| e.id.as_str()).collect::<Vec<_>>(), ["a", "b", "c"]);
}

#[test]
fn failed_submission_leaves_nothing_behind() {
    let db = seeded();
    let e = eval("e", "s2", EvaluatorKind::Peer, &[("voice", 3), ("structure", 4)]);
    let comment = ScreenedComment::screen(&"e".into(), &rubric().items[0], "Good voice", &CharacterPolicy::default());
    let r = db.write(|r| r.insert_evaluation(&e, &[comment], &[event("a", "e", 2_000), event("b", "e", 1_000)]));
    assert!(r.is_err());
    db.read(|r| {
        assert!(r.list_evaluations(&"i1".into())?.is_empty());
        assert!(r.list_comments(&"i1".into())?.is_empty());
        let n: i64 = r.connection().query_row("SELECT COUNT(*) FROM item_scores", [], |x| x.get(0))?;
        assert_eq!(n, 0);
        Ok(())
    })
    .unwrap();
}

#[test]
fn evaluation_with_comments_round_trips() {
    let db = seeded();
    let mut e = eval("e", "s2", EvaluatorKind::Peer, &[("voice", 4), ("slides", 2)]);
    e.item_comments.insert("voice".into(), Some("La voice fue clara".into()));
    let screened = ScreenedComment::screen(&"e".into(), &rubric().items[0], "La voice fue clara", &CharacterPolicy::default());
    db.write(|r| r.insert_evaluation(&e, &[screened.clone()], &[])).unwrap();
    let (evals, comments) = db.read(|r| Ok((r.list_evaluations(&"i1".into())?, r.list_comments(&"i1".into())?))).unwrap();
    assert_eq!(evals, vec![e]);
    assert_eq!(comments.len(), 1);
    assert!(comments[0].relevant);
    assert_eq!(comments[0].normalized_text, screened.normalized_text);
    assert_eq!(comments[0].matched_terms, screened.matched_terms);
}

#[test]
fn status_compare_and_set() {
    let db = seeded();
    let i = "i1".into();
    assert!(db.write(|r| r.cas_status(&i, InstanceStatus::Collecting, InstanceStatus::Generating, false)).unwrap());
    assert!(!db.write(|r| r.cas_status(&i, InstanceStatus::Collecting, InstanceStatus::Generating, false)).unwrap());
    assert!(db.write(|r| r.cas_status(&i, InstanceStatus::Generating, InstanceStatus::Sent, false)).is_err());
}

#[test]
fn only_one_running_job_per_instance() {
    let db = seeded();
    let now = Utc::now();
    db.write(|r| r.start_job("j1", &"i1".into(), now)).unwrap();
    assert!(matches!(db.write(|r| r.start_job("j2", &"i1".into(), now)), Err(StoreError::Conflict(_))));
    db.write(|r| r.finish_job("j1", JobStatus::Failed, Some("all providers failed"), now)).unwrap();
    db.write(|r| r.start_job("j2", &"i1".into(), now + Duration::seconds(1))).unwrap();
    let jobs = db.read(|r| r.jobs_for(&"i1".into())).unwrap();
    assert_eq!(jobs.iter().map(|j| j.status).collect::<Vec<_>>(), [JobStatus::Failed, JobStatus::Running]);
}

#[test]
fn tokens_expire() {
    let db = seeded();
    let now = Utc::now();
    db.write(|r| {
        r.insert_token("live", &"t1".into(), None)?;
        r.insert_token("old", &"t1".into(), Some(now - Duration::minutes(1)))
    })
    .unwrap();
    assert!(db.read(|r| r.user_for_token("live", now)).unwrap().is_some());
    assert!(db.read(|r| r.user_for_token("old", now)).unwrap().is_none());
    assert!(db.read(|r| r.user_for_token("nope", now)).unwrap().is_none());
}

#[test]
fn policies_and_templates_round_trip() {
    let db = seeded();
    let policy = ValidationPolicy::new(Language::Es).with_restricted(["tonto"]);
    let template = aicofe_core::prompt::PromptTemplate::standard("tpl", "c1".into(), Language::Es);
    db.write(|r| {
        r.upsert_policy(&"c1".into(), &policy)?;
        r.upsert_template(&template)?;
        r.set_course_template(&"c1".into(), &"tpl".into())
    })
    .unwrap();
    db.read(|r| {
        assert_eq!(r.get_policy(&"c1".into())?, Some(policy.clone()));
        assert_eq!(r.get_template(&"tpl".into())?, template);
        assert_eq!(r.get_course(&"c1".into())?.prompt_template_id, Some("tpl".into()));
        Ok(())
    })
    .unwrap();
}

#[test]
fn idempotency_keys_replay() {
    let db = seeded();
    db.write(|r| r.save_idempotent_response("k", "POST /x", 201, "{}", Utc::now())).unwrap();
    assert_eq!(db.read(|r| r.idempotent_response("k", "POST /x")).unwrap(), Some((201, "{}".into())));
    assert_eq!(db.read(|r| r.idempotent_response("k", "POST /y")).unwrap(), None);
}
