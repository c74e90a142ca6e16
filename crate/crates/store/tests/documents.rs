//! Document store semantics on both backends.

mod common;

use aicofe_core::curation::{
    compose, CandidateSpec, Composition, ComposedFeedback, FeedbackCandidate, FeedbackSource, FeedbackState,
    SegmenterConfig, Selection,
};
use aicofe_core::model::FeedbackRating;
use aicofe_core::validation::ValidationVerdict;
use aicofe_store::{Collection, DocFilter, Documents, StoreError};
use chrono::Utc;
use serde_json::json;

const TEXT: &str = "Tu voz fue clara y el ritmo adecuado.\n\nPodrías mejorar la estructura del cierre.\n\nEnsaya dos veces antes de la próxima sesión.";

fn candidate(instance: &str, id: &str, source: FeedbackSource) -> FeedbackCandidate {
    FeedbackCandidate::segment(
        TEXT,
        CandidateSpec {
            id: id.into(),
            instance_id: instance.into(),
            provider_id: source.as_str(),
            source,
            verdict: ValidationVerdict::from_violations(vec![]),
            regenerations: 0,
            created_at: Utc::now(),
        },
        &SegmenterConfig::default(),
    )
    .unwrap()
}

fn composed(instance: &str, version: u32) -> ComposedFeedback {
    let c = candidate(instance, &format!("{instance}-gpt"), FeedbackSource::Gpt);
    compose(Composition {
        instance_id: &instance.into(),
        version,
        composed_by: &"t1".into(),
        selections: &[
            Selection::Paragraph { candidate_id: c.id.clone(), paragraph: 0 },
            Selection::TeacherText { teacher_text: "Buen trabajo en general.".into() },
        ],
        candidates: &[c],
        allow_unpassed: false,
        now: Utc::now(),
    })
    .unwrap()
}

fn backends() -> Vec<(&'static str, Documents, Option<tempfile::TempDir>)> {
    let dir = tempfile::tempdir().unwrap();
    let fs = Documents::open_dir(dir.path()).unwrap();
    vec![("memory", Documents::in_memory(), None), ("fs", fs, Some(dir))]
}

#[test]
fn composed_feedback_round_trips_byte_identically() {
    for (name, docs, _dir) in backends() {
        let f = composed("i1", 1);
        docs.insert_composed(&f).unwrap();
        let raw1 = docs.get_document(Collection::ComposedFeedback, "i1-v1").unwrap().unwrap().raw;
        let raw2 = docs.get_document(Collection::ComposedFeedback, "i1-v1").unwrap().unwrap().raw;
        assert_eq!(raw1, raw2, "{name}");
        let back = docs.composed(&"i1".into(), 1).unwrap().unwrap();
        assert_eq!(serde_json::to_string(&back).unwrap(), serde_json::to_string(&f).unwrap(), "{name}");
        assert_eq!(back, f);
    }
}

#[test]
fn duplicate_versions_conflict() {
    for (name, docs, _dir) in backends() {
        docs.insert_composed(&composed("i1", 1)).unwrap();
        let r = docs.insert_composed(&composed("i1", 1));
        assert!(matches!(r, Err(StoreError::Conflict(_))), "{name}");
        docs.insert_composed(&composed("i1", 2)).unwrap();
        assert_eq!(docs.composed_versions(&"i1".into()).unwrap().len(), 2);
    }
}

#[test]
fn send_is_a_single_transition() {
    for (name, docs, _dir) in backends() {
        docs.insert_composed(&composed("i1", 1)).unwrap();
        let sent = docs.mark_sent(&"i1".into(), 1, Utc::now()).unwrap();
        assert_eq!(sent.state, FeedbackState::Sent);
        assert!(matches!(docs.mark_sent(&"i1".into(), 1, Utc::now()), Err(StoreError::Conflict(_))), "{name}");
        let stored = docs.composed(&"i1".into(), 1).unwrap().unwrap();
        assert_eq!(stored, sent);
        let filtered = docs
            .load_documents(Collection::ComposedFeedback, &DocFilter::instance(&"i1".into()).state("sent").version(1))
            .unwrap();
        assert_eq!(filtered.len(), 1);
    }
}

#[test]
fn thousand_candidates_load_by_instance() {
    for (name, docs, _dir) in backends() {
        let sources = [FeedbackSource::Gpt, FeedbackSource::Gemini, FeedbackSource::Llama];
        let mut expected = std::collections::BTreeMap::new();
        for n in 0..1000 {
            let instance = format!("inst{}", n % 7);
            let mut c = candidate(&instance, &format!("cand{n}"), sources[n % 3]);
            if n % 5 == 0 {
                c.paragraphs.truncate(1);
                c.regenerations = 2;
                c.verdict = ValidationVerdict::from_violations(vec![aicofe_core::validation::Violation {
                    code: aicofe_core::validation::ViolationCode::WrongParagraphCount,
                    detail: "1 paragraph".into(),
                }]);
            }
            docs.insert_candidate(&c).unwrap();
            *expected.entry(instance).or_insert(0usize) += 1;
        }
        for (instance, count) in expected {
            let got = docs.candidates(&instance.as_str().into()).unwrap();
            assert_eq!(got.len(), count, "{name} {instance}");
        }
        let gpt = docs
            .load_documents(Collection::FeedbackCandidates, &DocFilter::instance(&"inst0".into()).provider("gpt"))
            .unwrap();
        assert_eq!(gpt.len(), (0..1000).filter(|n| n % 7 == 0 && n % 3 == 0).count());
    }
}

#[test]
fn unknown_schema_version_fails_loudly() {
    let dir = tempfile::tempdir().unwrap();
    let docs = Documents::open_dir(dir.path()).unwrap();
    docs.insert_composed(&composed("i1", 1)).unwrap();
    let path = dir.path().join("composed_feedback/i1-v1.json");
    let raw = std::fs::read_to_string(&path).unwrap();
    std::fs::write(&path, raw.replace("\"schema_version\":1", "\"schema_version\":2")).unwrap();
    let err = docs.composed(&"i1".into(), 1).unwrap_err();
    assert!(matches!(&err, StoreError::Schema(m) if m.contains("unknown schema_version 2")), "{err}");
    assert!(docs.composed_versions(&"i1".into()).is_err());
}

#[test]
fn ratings_are_one_per_rater_and_version() {
    let docs = Documents::in_memory();
    let r = FeedbackRating {
        instance_id: "i1".into(),
        feedback_version_id: "i1-v1".into(),
        rater_id: "s1".into(),
        agreement: 4,
        usefulness: 5,
        comment: None,
    };
    docs.insert_rating(&r, Utc::now()).unwrap();
    assert!(matches!(docs.insert_rating(&r, Utc::now()), Err(StoreError::Conflict(_))));
    assert_eq!(docs.ratings(&"i1".into()).unwrap(), vec![r]);
}

#[test]
fn generic_documents_are_validated() {
    let docs = Documents::in_memory();
    let ok = json!({
        "instance_id": "i1", "provider_id": "mock-gpt", "lane": "gpt",
        "prompt_digest": "0".repeat(64), "raw_text": "x", "latency_ms": 3, "attempt": 1, "outcome": "ok"
    });
    docs.insert_generation_result("g1", &ok, Utc::now()).unwrap();
    let mut bad = ok.clone();
    bad["outcome"] = json!("maybe");
    assert!(matches!(docs.insert_generation_result("g2", &bad, Utc::now()), Err(StoreError::Schema(_))));
}
