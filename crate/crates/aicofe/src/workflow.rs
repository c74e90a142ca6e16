//! Evaluation intake, curation, delivery and the read models built on them.

use std::collections::BTreeMap;

use aicofe_core::analytics::{aggregate_scores, compare_self_vs_aggregate, Aggregate, SelfComparison};
use aicofe_core::curation::{
    compose, edit_sentence, ComposedFeedback, Composition, FeedbackCandidate, FeedbackSource, FeedbackState,
    Selection,
};
use aicofe_core::model::{
    Evaluation, EvaluationId, EvaluationInstance, EvaluatorKind, EventId, FeedbackRating, InstanceId,
    InstanceStatus, InteractionEvent, InteractionKind, ItemId, Role, RubricId, CourseId, SentenceId, User, UserId,
};
use aicofe_core::preprocess::{deanonymize, CharacterPolicy, RedactionMap, ScreenedComment};
use aicofe_core::validation::restricted_findings;
use aicofe_store::{GenerationJob, HistoryEvent, MediaKind, Recording, StoreError, StoredComment};
use chrono::{DateTime, Utc};
use serde::{Deserialize, Serialize};

use crate::error::{AppError, Result};
use crate::service::Service;

const VERSION_RETRIES: usize = 8;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct EventInput {
    pub item_id: ItemId,
    pub kind: InteractionKind,
    #[serde(default)]
    pub value: Option<i32>,
    pub occurred_at: DateTime<Utc>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct EvaluationSubmission {
    pub instance_id: InstanceId,
    /// Optional; must agree with the kind derived from the evaluator.
    #[serde(default)]
    pub evaluator_kind: Option<EvaluatorKind>,
    pub item_scores: BTreeMap<ItemId, i32>,
    #[serde(default)]
    pub item_comments: BTreeMap<ItemId, String>,
    #[serde(default)]
    pub events: Vec<EventInput>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ScreenedSummary {
    pub item_id: ItemId,
    pub relevant: bool,
    pub matched_terms: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SubmissionReceipt {
    pub evaluation_id: EvaluationId,
    pub evaluator_kind: EvaluatorKind,
    pub comments: Vec<ScreenedSummary>,
    /// Job claimed by the automatic trigger, if it fired.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub triggered_job: Option<GenerationJob>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct NewInstance {
    #[serde(default)]
    pub id: Option<InstanceId>,
    pub course_id: CourseId,
    pub rubric_id: RubricId,
    pub subject_student_id: UserId,
    pub session_label: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ComposeRequest {
    pub selections: Vec<Selection>,
    #[serde(default)]
    pub allow_unpassed: bool,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct EditRequest {
    pub sentence_id: SentenceId,
    pub text: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RatingRequest {
    pub version: u32,
    pub agreement: i32,
    pub usefulness: i32,
    #[serde(default)]
    pub comment: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CandidateView {
    #[serde(flatten)]
    pub candidate: FeedbackCandidate,
    pub display_text: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeedbackView {
    #[serde(flatten)]
    pub feedback: ComposedFeedback,
    pub display_text: String,
    pub percentages: BTreeMap<FeedbackSource, i64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HistoryEntry {
    pub instance_id: InstanceId,
    pub session_label: String,
    pub version: u32,
    pub feedback_id: String,
    pub sent_at: Option<DateTime<Utc>>,
    pub display_text: String,
    pub percentages: BTreeMap<FeedbackSource, i64>,
    pub teacher_modification_extent: f64,
    #[serde(default)]
    pub rating: Option<FeedbackRating>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RecordingInfo {
    pub id: String,
    pub media_kind: MediaKind,
    pub checksum: String,
    pub byte_size: u64,
}

impl From<&Recording> for RecordingInfo {
    fn from(r: &Recording) -> Self {
        Self {
            id: r.id.to_string(),
            media_kind: r.media_kind,
            checksum: r.checksum.clone(),
            byte_size: r.byte_size,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StudentView {
    pub instance: EvaluationInstance,
    pub aggregate: Aggregate,
    #[serde(default)]
    pub self_comparison: Option<BTreeMap<ItemId, SelfComparison>>,
    pub feedback: Vec<HistoryEntry>,
    #[serde(default)]
    pub recording: Option<RecordingInfo>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InstanceDetail {
    pub instance: EvaluationInstance,
    pub aggregate: Aggregate,
    pub evaluation_counts: BTreeMap<EvaluatorKind, usize>,
    pub comments: Vec<StoredComment>,
    #[serde(default)]
    pub latest_job: Option<GenerationJob>,
    pub versions: Vec<u32>,
    #[serde(default)]
    pub recording: Option<RecordingInfo>,
}

/// Splits a draft id of the form `{instance}-v{version}`.
pub fn parse_version_id(id: &str) -> Option<(InstanceId, u32)> {
    let (inst, v) = id.rsplit_once("-v")?;
    if inst.is_empty() {
        return None;
    }
    Some((InstanceId::new(inst), v.parse().ok().filter(|v| *v > 0)?))
}

fn truncate_ms(t: DateTime<Utc>) -> DateTime<Utc> {
    DateTime::from_timestamp_millis(t.timestamp_millis()).unwrap_or(t)
}

fn display(text: &str, map: Option<&RedactionMap>) -> String {
    match map {
        Some(m) => deanonymize(text, m).text,
        None => text.to_owned(),
    }
}

impl Service {
    fn redaction_map(&self, instance: &InstanceId) -> Result<Option<RedactionMap>> {
        Ok(self.store.docs.redaction_map(instance)?)
    }

    fn history_event(&self, instance: &InstanceId, kind: &str, actor: &User, version: Option<u32>, detail: serde_json::Value) -> Result<()> {
        let now = Utc::now();
        self.store.docs.insert_history(&HistoryEvent {
            id: format!("{instance}-{kind}-{}", uuid::Uuid::new_v4().simple()),
            instance_id: instance.clone(),
            kind: kind.into(),
            actor_id: actor.id.clone(),
            feedback_version: version,
            detail,
            created_at: now,
        })?;
        Ok(())
    }

    // Instances

    pub fn create_instance(&self, actor: &User, req: NewInstance) -> Result<EvaluationInstance> {
        self.require_staff(actor, &req.course_id)?;
        if req.session_label.trim().is_empty() {
            return Err(AppError::invalid("session_label must not be empty"));
        }
        let inst = EvaluationInstance {
            id: req
                .id
                .unwrap_or_else(|| InstanceId::new(format!("inst-{}", uuid::Uuid::new_v4().simple()))),
            course_id: req.course_id,
            rubric_id: req.rubric_id,
            subject_student_id: req.subject_student_id,
            session_label: req.session_label,
            recording_ref: None,
            status: InstanceStatus::Collecting,
        };
        self.store.db.write(|r| {
            let course = r.get_course(&inst.course_id)?;
            if !course.rubric_ids.contains(&inst.rubric_id) {
                return Err(aicofe_core::Error::domain(format!(
                    "rubric {} is not assigned to course {}",
                    inst.rubric_id, inst.course_id
                ))
                .into());
            }
            if !r.is_course_member(&inst.course_id, &inst.subject_student_id)? {
                return Err(aicofe_core::Error::domain(format!(
                    "{} is not a student of {}",
                    inst.subject_student_id, inst.course_id
                ))
                .into());
            }
            r.insert_instance(&inst)
        })?;
        Ok(inst)
    }

    /// Instances visible to the actor.
    pub fn list_instances(&self, actor: &User) -> Result<Vec<EvaluationInstance>> {
        let all = self.store.db.read(|r| match actor.role {
            Role::Student => r.list_instances(Some(&actor.id)),
            _ => r.list_instances(None),
        })?;
        Ok(match actor.role {
            Role::Teacher => all.into_iter().filter(|i| actor.course_ids.contains(&i.course_id)).collect(),
            _ => all,
        })
    }

    pub fn instance_detail(&self, actor: &User, instance: &InstanceId) -> Result<InstanceDetail> {
        let inst = self.instance(instance)?;
        self.require_staff(actor, &inst.course_id)?;
        let (rubric, evaluations, comments, jobs, recording) = self.store.db.read(|r| {
            Ok((
                r.get_rubric(&inst.rubric_id)?,
                r.list_evaluations(instance)?,
                r.list_comments(instance)?,
                r.jobs_for(instance)?,
                r.active_recording(instance)?,
            ))
        })?;
        let aggregate = aggregate_scores(instance, &rubric, &evaluations)?;
        let mut evaluation_counts = BTreeMap::new();
        for e in &evaluations {
            *evaluation_counts.entry(e.evaluator_kind).or_insert(0) += 1;
        }
        let versions = self.store.docs.composed_versions(instance)?.iter().map(|f| f.version).collect();
        Ok(InstanceDetail {
            instance: inst,
            aggregate,
            evaluation_counts,
            comments,
            latest_job: jobs.into_iter().last(),
            versions,
            recording: recording.as_ref().map(RecordingInfo::from),
        })
    }

    pub fn upload_recording(&self, actor: &User, instance: &InstanceId, kind: MediaKind, bytes: &[u8], extension: &str) -> Result<RecordingInfo> {
        let inst = self.instance(instance)?;
        self.require_staff(actor, &inst.course_id)?;
        if bytes.is_empty() {
            return Err(AppError::invalid("recording is empty"));
        }
        let rec = self.store.link_recording(instance, kind, bytes, extension, Utc::now())?;
        Ok(RecordingInfo::from(&rec))
    }

    // Evaluations

    /// Submits one evaluation. The evaluator kind follows from who submits.
    pub fn submit_evaluation(&self, actor: &User, sub: EvaluationSubmission) -> Result<SubmissionReceipt> {
        let inst = self.instance(&sub.instance_id)?;
        let kind = match actor.role {
            Role::Teacher => {
                self.require_staff(actor, &inst.course_id)?;
                EvaluatorKind::Teacher
            }
            Role::Student => {
                let member = self.store.db.read(|r| r.is_course_member(&inst.course_id, &actor.id))?;
                if !member {
                    return Err(AppError::forbidden(format!("{} is not enrolled in {}", actor.id, inst.course_id)));
                }
                if actor.id == inst.subject_student_id {
                    EvaluatorKind::SelfAssessment
                } else {
                    EvaluatorKind::Peer
                }
            }
            Role::Admin => return Err(AppError::forbidden("administrators do not evaluate")),
        };
        if let Some(claimed) = sub.evaluator_kind {
            if claimed != kind {
                return Err(AppError::invalid(format!(
                    "evaluator kind {} does not match the submitting user ({})",
                    claimed.as_str(),
                    kind.as_str()
                )));
            }
        }

        let rubric = self.store.db.read(|r| r.get_rubric(&inst.rubric_id))?;
        let evaluation_id = EvaluationId::new(format!("ev-{}", uuid::Uuid::new_v4().simple()));
        let evaluation = Evaluation {
            id: evaluation_id.clone(),
            instance_id: inst.id.clone(),
            evaluator_id: actor.id.clone(),
            evaluator_kind: kind,
            item_scores: sub.item_scores,
            item_comments: sub.item_comments.iter().map(|(k, v)| (k.clone(), Some(v.clone()))).collect(),
            submitted_at: truncate_ms(Utc::now()),
        };
        evaluation.validate(&inst, &rubric)?;

        let policy = CharacterPolicy::default();
        let screened: Vec<ScreenedComment> = sub
            .item_comments
            .iter()
            .map(|(item_id, raw)| {
                let item = rubric.item(item_id).expect("validated above");
                ScreenedComment::screen(&evaluation_id, item, raw, &policy)
            })
            .collect();

        let mut events = Vec::with_capacity(sub.events.len());
        let mut last: Option<DateTime<Utc>> = None;
        for (n, e) in sub.events.into_iter().enumerate() {
            if rubric.item(&e.item_id).is_none() {
                return Err(AppError::invalid(format!("event {n} refers to unknown item {}", e.item_id)));
            }
            let at = truncate_ms(e.occurred_at);
            if last.is_some_and(|l| at < l) {
                return Err(AppError::invalid(format!("event {n} is earlier than the one before it")));
            }
            last = Some(at);
            events.push(InteractionEvent {
                id: EventId::new(format!("{evaluation_id}-e{n}")),
                evaluation_id: evaluation_id.clone(),
                item_id: e.item_id,
                kind: e.kind,
                value: e.value,
                occurred_at: at,
            });
        }

        let non_self = self.store.db.write(|r| {
            let current = r.get_instance(&inst.id)?;
            if current.status != InstanceStatus::Collecting {
                return Err(StoreError::Conflict(format!(
                    "instance {} is {}; evaluations are closed",
                    inst.id,
                    current.status.as_str()
                )));
            }
            let existing = r.list_evaluations(&inst.id)?;
            if existing.iter().any(|e| e.evaluator_id == actor.id) {
                return Err(StoreError::Conflict(format!("{} already evaluated {}", actor.id, inst.id)));
            }
            r.insert_evaluation(&evaluation, &screened, &events)?;
            Ok(existing
                .iter()
                .chain(std::iter::once(&evaluation))
                .filter(|e| e.evaluator_kind != EvaluatorKind::SelfAssessment)
                .count())
        })?;
        tracing::info!(instance = %inst.id, evaluation = %evaluation_id, kind = kind.as_str(), "evaluation stored");

        let triggered_job = if self.settings.auto_trigger
            && kind != EvaluatorKind::SelfAssessment
            && non_self == self.settings.auto_trigger_after
        {
            match self.claim_generation(&inst.id) {
                Ok(job) => Some(job),
                Err(AppError::Conflict { .. }) => None,
                Err(e) => return Err(e),
            }
        } else {
            None
        };

        Ok(SubmissionReceipt {
            evaluation_id,
            evaluator_kind: kind,
            comments: screened
                .iter()
                .map(|c| ScreenedSummary {
                    item_id: c.item_id.clone(),
                    relevant: c.relevant,
                    matched_terms: c.matched_terms.iter().cloned().collect(),
                })
                .collect(),
            triggered_job,
        })
    }

    // Curation

    pub fn candidates(&self, actor: &User, instance: &InstanceId) -> Result<Vec<CandidateView>> {
        let inst = self.instance(instance)?;
        self.require_staff(actor, &inst.course_id)?;
        let map = self.redaction_map(instance)?;
        Ok(self
            .store
            .docs
            .candidates(instance)?
            .into_iter()
            .map(|c| CandidateView {
                display_text: display(&c.text(), map.as_ref()),
                candidate: c,
            })
            .collect())
    }

    fn feedback_view(f: ComposedFeedback, map: Option<&RedactionMap>) -> FeedbackView {
        FeedbackView {
            display_text: display(&f.text(), map),
            percentages: f.breakdown.percentages(),
            feedback: f,
        }
    }

    /// Stores the next version, retrying when a concurrent writer took the number.
    fn insert_next_version(&self, instance: &InstanceId, build: impl Fn(u32) -> Result<ComposedFeedback>) -> Result<ComposedFeedback> {
        for _ in 0..VERSION_RETRIES {
            let next = self
                .store
                .docs
                .composed_versions(instance)?
                .last()
                .map_or(1, |f| f.version + 1);
            let draft = build(next)?;
            match self.store.docs.insert_composed(&draft) {
                Ok(()) => return Ok(draft),
                Err(StoreError::Conflict(_)) => continue,
                Err(e) => return Err(e.into()),
            }
        }
        Err(AppError::conflict(format!("could not allocate a feedback version for {instance}")))
    }

    pub fn compose(&self, actor: &User, instance: &InstanceId, req: ComposeRequest) -> Result<FeedbackView> {
        let inst = self.instance(instance)?;
        self.require_staff(actor, &inst.course_id)?;
        match inst.status {
            InstanceStatus::Curating => {}
            InstanceStatus::Sent => {
                self.store
                    .db
                    .write(|r| r.cas_status(instance, InstanceStatus::Sent, InstanceStatus::Curating, true))?;
            }
            other => {
                return Err(AppError::conflict(format!(
                    "instance {instance} is {}; nothing to curate yet",
                    other.as_str()
                )))
            }
        }
        let candidates = self.store.docs.candidates(instance)?;
        let draft = self.insert_next_version(instance, |version| {
            Ok(compose(Composition {
                instance_id: instance,
                version,
                composed_by: &actor.id,
                selections: &req.selections,
                candidates: &candidates,
                allow_unpassed: req.allow_unpassed,
                now: Utc::now(),
            })?)
        })?;
        self.history_event(
            instance,
            "composed",
            actor,
            Some(draft.version),
            serde_json::json!({ "sentences": draft.sentences.len(), "override_unpassed": draft.override_unpassed }),
        )?;
        let map = self.redaction_map(instance)?;
        Ok(Self::feedback_view(draft, map.as_ref()))
    }

    fn version(&self, instance: &InstanceId, version: u32) -> Result<ComposedFeedback> {
        self.store
            .docs
            .composed(instance, version)?
            .ok_or_else(|| AppError::not_found(format!("version {version} of {instance}")))
    }

    /// Replaces one sentence, producing a new draft version.
    pub fn edit(&self, actor: &User, instance: &InstanceId, version: u32, req: EditRequest) -> Result<FeedbackView> {
        let inst = self.instance(instance)?;
        self.require_staff(actor, &inst.course_id)?;
        let base = self.version(instance, version)?;
        if base.state == FeedbackState::Sent {
            return Err(AppError::conflict(format!("{} was sent; compose a new version instead", base.id)));
        }
        let edited = self.insert_next_version(instance, |next| {
            Ok(edit_sentence(&base, &req.sentence_id, &req.text, next, &actor.id, Utc::now())?)
        })?;
        self.history_event(
            instance,
            "edited",
            actor,
            Some(edited.version),
            serde_json::json!({ "parent_version": version, "sentence_id": req.sentence_id }),
        )?;
        let map = self.redaction_map(instance)?;
        Ok(Self::feedback_view(edited, map.as_ref()))
    }

    /// Delivers a draft to the subject student.
    pub fn send(&self, actor: &User, instance: &InstanceId, version: u32) -> Result<FeedbackView> {
        let inst = self.instance(instance)?;
        self.require_staff(actor, &inst.course_id)?;
        let draft = self.version(instance, version)?;
        if draft.state == FeedbackState::Sent {
            return Err(AppError::conflict(format!("{} was already sent", draft.id)));
        }
        let course = self.course(&inst.course_id)?;
        let policy = self.policy_for(&course)?;
        let hits = restricted_findings(&draft.text(), &policy.restricted_terms, None);
        if !hits.is_empty() {
            return Err(AppError::invalid(format!("restricted terms present: {}", hits.join(", "))));
        }
        let moved = self
            .store
            .db
            .write(|r| r.cas_status(instance, InstanceStatus::Curating, InstanceStatus::Sent, false))?;
        if !moved {
            return Err(AppError::conflict(format!("instance {instance} is not in curation")));
        }
        let sent = match self.store.docs.mark_sent(instance, version, Utc::now()) {
            Ok(s) => s,
            Err(e) => {
                self.store
                    .db
                    .write(|r| r.cas_status(instance, InstanceStatus::Sent, InstanceStatus::Curating, true))?;
                return Err(e.into());
            }
        };
        self.history_event(instance, "sent", actor, Some(version), serde_json::json!({ "feedback_id": sent.id }))?;
        tracing::info!(instance = %instance, version, "feedback sent");
        let map = self.redaction_map(instance)?;
        Ok(Self::feedback_view(sent, map.as_ref()))
    }

    /// All versions, newest first.
    pub fn versions(&self, actor: &User, instance: &InstanceId) -> Result<Vec<FeedbackView>> {
        let inst = self.instance(instance)?;
        self.require_staff(actor, &inst.course_id)?;
        let map = self.redaction_map(instance)?;
        let mut all = self.store.docs.composed_versions(instance)?;
        all.reverse();
        Ok(all.into_iter().map(|f| Self::feedback_view(f, map.as_ref())).collect())
    }

    // Read models

    fn sent_entries(&self, inst: &EvaluationInstance) -> Result<Vec<HistoryEntry>> {
        let map = self.redaction_map(&inst.id)?;
        let ratings = self.store.docs.ratings(&inst.id)?;
        let mut out: Vec<HistoryEntry> = self
            .store
            .docs
            .composed_versions(&inst.id)?
            .into_iter()
            .filter(|f| f.state == FeedbackState::Sent)
            .map(|f| HistoryEntry {
                instance_id: inst.id.clone(),
                session_label: inst.session_label.clone(),
                version: f.version,
                feedback_id: f.id.to_string(),
                sent_at: f.sent_at,
                display_text: display(&f.text(), map.as_ref()),
                percentages: f.breakdown.percentages(),
                teacher_modification_extent: f.breakdown.teacher_modification_extent,
                rating: ratings.iter().find(|r| r.feedback_version_id == f.id.as_str()).cloned(),
            })
            .collect();
        out.sort_by_key(|e| e.sent_at);
        Ok(out)
    }

    /// Sent feedback of one instance for staff.
    pub fn instance_history(&self, actor: &User, instance: &InstanceId) -> Result<Vec<HistoryEntry>> {
        let inst = self.instance(instance)?;
        self.require_staff(actor, &inst.course_id)?;
        self.sent_entries(&inst)
    }

    /// Sent feedback across every instance of a student in the actor's courses.
    pub fn student_history(&self, actor: &User, student: &UserId) -> Result<Vec<HistoryEntry>> {
        self.user(student)?;
        let instances = self.store.db.read(|r| r.list_instances(Some(student)))?;
        let mut out = Vec::new();
        for inst in instances {
            if self.require_staff(actor, &inst.course_id).is_ok() {
                out.extend(self.sent_entries(&inst)?);
            }
        }
        out.sort_by_key(|e| e.sent_at);
        Ok(out)
    }

    /// What the subject student sees: scores, self comparison, sent feedback, recording.
    pub fn student_view(&self, actor: &User, instance: &InstanceId) -> Result<StudentView> {
        let inst = self.instance(instance)?;
        self.require_subject(actor, &inst)?;
        let (rubric, evaluations, recording) = self.store.db.read(|r| {
            Ok((r.get_rubric(&inst.rubric_id)?, r.list_evaluations(instance)?, r.active_recording(instance)?))
        })?;
        let aggregate = aggregate_scores(instance, &rubric, &evaluations)?;
        let own = evaluations.iter().find(|e| e.evaluator_kind == EvaluatorKind::SelfAssessment);
        let self_comparison = match own {
            Some(e) => Some(compare_self_vs_aggregate(Some(e), &aggregate, self.settings.alignment_epsilon)?),
            None => None,
        };
        let feedback = self.sent_entries(&inst)?;
        Ok(StudentView {
            instance: inst,
            aggregate,
            self_comparison,
            feedback,
            recording: recording.as_ref().map(RecordingInfo::from),
        })
    }

    pub fn recording_bytes(&self, actor: &User, instance: &InstanceId) -> Result<(RecordingInfo, Vec<u8>)> {
        let inst = self.instance(instance)?;
        if self.require_subject(actor, &inst).is_err() {
            self.require_staff(actor, &inst.course_id)?;
        }
        let rec = self
            .store
            .db
            .read(|r| r.active_recording(instance))?
            .ok_or_else(|| AppError::not_found(format!("recording for {instance}")))?;
        let bytes = self.store.files.get(&rec.file())?;
        Ok((RecordingInfo::from(&rec), bytes))
    }

    /// The subject rates a sent version once.
    pub fn rate(&self, actor: &User, instance: &InstanceId, req: RatingRequest) -> Result<FeedbackRating> {
        let inst = self.instance(instance)?;
        self.require_subject(actor, &inst)?;
        let f = self.version(instance, req.version)?;
        if f.state != FeedbackState::Sent {
            return Err(AppError::conflict(format!("{} has not been sent", f.id)));
        }
        let rubric = self.store.db.read(|r| r.get_rubric(&inst.rubric_id))?;
        let rating = FeedbackRating {
            instance_id: instance.clone(),
            feedback_version_id: f.id.to_string(),
            rater_id: actor.id.clone(),
            agreement: req.agreement,
            usefulness: req.usefulness,
            comment: req.comment,
        };
        rating.validate(&rubric)?;
        self.store.docs.insert_rating(&rating, Utc::now())?;
        self.history_event(instance, "rated", actor, Some(req.version), serde_json::json!({}))?;
        Ok(rating)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn version_ids_parse() {
        assert_eq!(parse_version_id("i1-v3"), Some(("i1".into(), 3)));
        assert_eq!(parse_version_id("inst-v2-v10"), Some(("inst-v2".into(), 10)));
        assert_eq!(parse_version_id("i1-v0"), None);
        assert_eq!(parse_version_id("-v1"), None);
        assert_eq!(parse_version_id("i1"), None);
    }

    #[test]
    fn timestamps_truncate_to_millis() {
        let t = DateTime::parse_from_rfc3339("2026-01-01T10:00:00.123456789Z").unwrap().with_timezone(&Utc);
        assert_eq!(truncate_ms(t).timestamp_subsec_nanos(), 123_000_000);
    }
}
