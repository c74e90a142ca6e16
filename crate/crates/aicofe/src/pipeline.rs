//! Generation: preprocess, prompt, fan-out with validation, segmentation, persistence.

use aicofe_core::analytics::aggregate_scores;
use aicofe_core::curation::{CandidateSpec, FeedbackCandidate, FeedbackSource, SegmenterConfig};
use aicofe_core::model::{EvaluatorKind, InstanceId, InstanceStatus, User};
use aicofe_core::preprocess::{find_residuals, RedactionMap};
use aicofe_core::prompt::{build_prompt, PromptBudget, PromptComment, PromptRequest};
use aicofe_core::text::email_regex;
use aicofe_core::validation::{ValidationPolicy, Violation};
use aicofe_gateway::{GatewayError, GenerationResult, Outcome, OutboundGuard, ValidatedCandidate};
use aicofe_store::{GenerationJob, HistoryEvent, JobStatus};
use chrono::Utc;
use serde::{Deserialize, Serialize};

use crate::error::{AppError, Result};
use crate::service::Service;

/// Rejects prompts that still contain e-mail addresses.
pub struct EmailGuard;

impl OutboundGuard for EmailGuard {
    fn check(&self, prompt: &str) -> Result<(), String> {
        match email_regex().find(prompt) {
            Some(_) => Err("prompt contains an e-mail address".into()),
            None => Ok(()),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CandidateSummary {
    pub candidate_id: String,
    pub provider_id: String,
    pub source: FeedbackSource,
    pub passed: bool,
    pub regenerations: u32,
    pub provider_calls: u32,
    pub violations: Vec<Violation>,
    pub sentence_count: usize,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ProviderFailure {
    pub provider_id: String,
    pub outcome: Outcome,
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GenerationReport {
    pub job_id: String,
    pub instance_id: InstanceId,
    pub prompt_digest: String,
    pub candidates: Vec<CandidateSummary>,
    pub failures: Vec<ProviderFailure>,
}

/// Inputs gathered before any provider is called.
struct Prepared {
    bundle: aicofe_core::prompt::PromptBundle,
    map: RedactionMap,
    policy: ValidationPolicy,
}

impl Service {
    /// Claims the single generation slot of an instance.
    ///
    /// Allowed from `collecting`, or from `generating` when the previous job
    /// failed. Anything else is a conflict.
    pub fn start_generation(&self, actor: &User, instance: &InstanceId) -> Result<GenerationJob> {
        let inst = self.instance(instance)?;
        self.require_staff(actor, &inst.course_id)?;
        self.claim_generation(instance)
    }

    /// [`Service::start_generation`] without the actor check, for automatic triggers.
    pub(crate) fn claim_generation(&self, instance: &InstanceId) -> Result<GenerationJob> {
        let job_id = format!("job-{}", uuid::Uuid::new_v4().simple());
        let now = Utc::now();
        let job = self.store.db.write(|r| {
            let inst = r.get_instance(instance)?;
            let peers = r
                .list_evaluations(instance)?
                .iter()
                .filter(|e| e.evaluator_kind != EvaluatorKind::SelfAssessment)
                .count();
            match inst.status {
                InstanceStatus::Collecting => {
                    if peers == 0 {
                        return Err(aicofe_core::Error::domain("no peer or teacher evaluations to generate from").into());
                    }
                    if !r.cas_status(instance, InstanceStatus::Collecting, InstanceStatus::Generating, false)? {
                        return Err(aicofe_store::StoreError::Conflict("instance status changed".into()));
                    }
                }
                InstanceStatus::Generating => {
                    let last = r.jobs_for(instance)?.pop();
                    if !matches!(last, Some(ref j) if j.status == JobStatus::Failed) {
                        return Err(aicofe_store::StoreError::Conflict(format!(
                            "a generation job is already running for {instance}"
                        )));
                    }
                }
                other => {
                    return Err(aicofe_store::StoreError::Conflict(format!(
                        "instance {instance} is {}; generation already happened",
                        other.as_str()
                    )))
                }
            }
            r.start_job(&job_id, instance, now)
        })?;
        tracing::info!(job = %job.id, instance = %instance, "generation started");
        Ok(job)
    }

    /// Runs a claimed job to completion and records its outcome.
    pub async fn run_generation(&self, job: &GenerationJob) -> Result<GenerationReport> {
        let outcome = self.run_inner(job).await;
        let now = Utc::now();
        match &outcome {
            Ok(report) => {
                let detail = serde_json::to_string(report).map_err(|e| AppError::internal(e.to_string()))?;
                self.store.db.write(|r| {
                    r.finish_job(&job.id, JobStatus::Succeeded, Some(&detail), now)?;
                    r.cas_status(&job.instance_id, InstanceStatus::Generating, InstanceStatus::Curating, false)?;
                    Ok(())
                })?;
                tracing::info!(job = %job.id, candidates = report.candidates.len(), "generation finished");
            }
            Err(e) => {
                let detail = e.to_string();
                self.store
                    .db
                    .write(|r| r.finish_job(&job.id, JobStatus::Failed, Some(&detail), now))?;
                tracing::warn!(job = %job.id, error = %detail, "generation failed");
            }
        }
        outcome
    }

    /// Claims and runs in one call.
    pub async fn generate(&self, actor: &User, instance: &InstanceId) -> Result<GenerationReport> {
        let job = self.start_generation(actor, instance)?;
        self.run_generation(&job).await
    }

    fn prepare(&self, instance: &InstanceId) -> Result<Prepared> {
        let inst = self.instance(instance)?;
        let course = self.course(&inst.course_id)?;
        let (rubric, evaluations, comments, materials) = self.store.db.read(|r| {
            Ok((
                r.get_rubric(&inst.rubric_id)?,
                r.list_evaluations(instance)?,
                r.list_comments(instance)?,
                r.course_materials(&inst.course_id)?,
            ))
        })?;
        let aggregate = aggregate_scores(instance, &rubric, &evaluations)?;
        let prompt_comments: Vec<PromptComment> = comments
            .iter()
            .filter(|c| c.relevant && !c.normalized_text.is_empty())
            .map(|c| PromptComment {
                comment_id: format!("{}:{}", c.evaluation_id, c.item_id),
                item_id: c.item_id.clone(),
                evaluator_kind: c.evaluator_kind,
                text: c.normalized_text.clone(),
            })
            .collect();
        let policy = self.policy_for(&course)?;
        let template = self.template_for(&course)?;
        let roster = self.roster(&inst)?;
        let mut map = self
            .store
            .docs
            .redaction_map(instance)?
            .unwrap_or_else(|| RedactionMap::new(instance.clone()));
        let bundle = build_prompt(
            &PromptRequest {
                instance: &inst,
                rubric: &rubric,
                aggregate: &aggregate,
                comments: &prompt_comments,
                materials: &materials,
                template: &template,
                limits: policy.limits(),
                budget: PromptBudget::default(),
                roster: &roster,
            },
            &mut map,
        )?;
        let residuals = find_residuals(&bundle.rendered_text, &roster);
        if !residuals.is_empty() {
            return Err(AppError::internal(format!(
                "prompt for {instance} still contains {} identifying token(s)",
                residuals.len()
            )));
        }
        let now = Utc::now();
        self.store.docs.put_redaction_map(&map, now)?;
        self.store.docs.insert_bundle(&bundle, now)?;
        Ok(Prepared { bundle, map, policy })
    }

    async fn run_inner(&self, job: &GenerationJob) -> Result<GenerationReport> {
        let instance = &job.instance_id;
        let prep = self.prepare(instance)?;
        let outcomes = match self.gateway.generate_validated(&prep.bundle, &prep.policy, Some(&prep.map)).await {
            Ok(o) => o,
            Err(GatewayError::NoCandidates(results)) => {
                for r in &results {
                    self.record_result(job, r)?;
                }
                return Err(AppError::Generation {
                    message: format!("no candidates produced by {} provider(s)", results.len()),
                });
            }
            Err(e) => return Err(e.into()),
        };

        let mut candidates = Vec::new();
        let mut failures = Vec::new();
        for o in &outcomes {
            self.record_result(job, &o.result)?;
            match self.store_candidate(job, o)? {
                Some(summary) => candidates.push(summary),
                None => failures.push(ProviderFailure {
                    provider_id: o.result.provider_id.clone(),
                    outcome: o.result.outcome,
                    error: o.result.error.clone(),
                }),
            }
        }
        if candidates.is_empty() {
            return Err(AppError::Generation {
                message: "no candidate could be segmented".into(),
            });
        }
        self.store.docs.insert_history(&HistoryEvent {
            id: format!("{}-generated", job.id),
            instance_id: instance.clone(),
            kind: "generated".into(),
            actor_id: "system".into(),
            feedback_version: None,
            detail: serde_json::json!({
                "job_id": job.id,
                "candidates": candidates.len(),
                "failures": failures.len(),
            }),
            created_at: Utc::now(),
        })?;
        Ok(GenerationReport {
            job_id: job.id.clone(),
            instance_id: instance.clone(),
            prompt_digest: prep.bundle.text_digest(),
            candidates,
            failures,
        })
    }

    fn record_result(&self, job: &GenerationJob, result: &GenerationResult) -> Result<()> {
        let id = format!("{}-{}", job.id, result.provider_id);
        self.store.docs.insert_generation_result(&id, result, Utc::now())?;
        Ok(())
    }

    fn store_candidate(&self, job: &GenerationJob, o: &ValidatedCandidate) -> Result<Option<CandidateSummary>> {
        let (Some(verdict), true) = (&o.verdict, o.result.is_ok()) else {
            return Ok(None);
        };
        let suffix = job.id.trim_start_matches("job-");
        let id = format!("{}-{}-{}", job.instance_id, o.result.provider_id, &suffix[..suffix.len().min(8)]);
        let candidate = match FeedbackCandidate::segment(
            &o.result.raw_text,
            CandidateSpec {
                id: id.into(),
                instance_id: job.instance_id.clone(),
                provider_id: &o.result.provider_id,
                source: o.result.lane,
                verdict: verdict.clone(),
                regenerations: o.regenerations,
                created_at: Utc::now(),
            },
            &SegmenterConfig::default(),
        ) {
            Ok(c) => c,
            Err(e) => {
                tracing::warn!(provider = %o.result.provider_id, error = %e, "segmentation failed");
                return Ok(None);
            }
        };
        self.store.docs.insert_candidate(&candidate)?;
        Ok(Some(CandidateSummary {
            candidate_id: candidate.id.to_string(),
            provider_id: candidate.provider_id.clone(),
            source: candidate.source,
            passed: candidate.verdict.passed,
            regenerations: candidate.regenerations,
            provider_calls: o.provider_calls,
            violations: candidate.verdict.violations.clone(),
            sentence_count: candidate.sentences().count(),
        }))
    }

    /// The latest job of an instance with its report, if it succeeded.
    pub fn generation_status(&self, actor: &User, instance: &InstanceId) -> Result<Option<(GenerationJob, Option<GenerationReport>)>> {
        let inst = self.instance(instance)?;
        self.require_staff(actor, &inst.course_id)?;
        let Some(job) = self.store.db.read(|r| r.jobs_for(instance))?.pop() else {
            return Ok(None);
        };
        let report = match (job.status, &job.detail) {
            (JobStatus::Succeeded, Some(d)) => serde_json::from_str(d).ok(),
            _ => None,
        };
        Ok(Some((job, report)))
    }
}
