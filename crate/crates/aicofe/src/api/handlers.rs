use aicofe_core::model::{Course, CourseId, Group, GroupId, InstanceId, ItemId, Material, Rubric, RubricId, User, UserId};
use aicofe_core::prompt::PromptTemplate;
use aicofe_core::validation::ValidationPolicy;
use aicofe_store::MediaKind;
use axum::body::Bytes;
use axum::extract::{Path, Query, State};
use axum::http::{header, HeaderMap, HeaderValue, StatusCode};
use axum::response::{IntoResponse, Response};
use axum::{Extension, Json};
use serde::{Deserialize, Serialize};

use super::{blocking, openapi::document, Actor, AppState, Body};
use crate::admin::{LanguageRequest, MemberRequest, RelevanceRequest, TokenRequest};
use crate::error::AppError;
use crate::workflow::{parse_version_id, ComposeRequest, EditRequest, EvaluationSubmission, NewInstance, RatingRequest};

type ApiResult = Result<Response, AppError>;

fn created<T: Serialize>(v: T) -> ApiResult {
    Ok((StatusCode::CREATED, Json(v)).into_response())
}

fn ok<T: Serialize>(v: T) -> ApiResult {
    Ok(Json(v).into_response())
}

fn draft_id(id: &str) -> Result<(InstanceId, u32), AppError> {
    parse_version_id(id).ok_or_else(|| AppError::not_found(format!("draft {id}")))
}

pub async fn health() -> ApiResult {
    ok(serde_json::json!({ "status": "ok" }))
}

pub async fn ready(State(s): State<AppState>) -> ApiResult {
    let checked = blocking(&s, |svc| {
        svc.store().db.read(|r| r.list_courses())?;
        svc.store().docs.scan_raw(aicofe_store::Collection::HistoryEvents)?;
        Ok(svc.gateway().descriptors().count())
    })
    .await;
    match checked {
        Ok(providers) => ok(serde_json::json!({ "status": "ready", "providers": providers })),
        Err(e) => Ok((
            StatusCode::SERVICE_UNAVAILABLE,
            Json(serde_json::json!({ "status": "unavailable", "message": e.to_string() })),
        )
            .into_response()),
    }
}

pub async fn openapi() -> ApiResult {
    ok(document())
}

pub async fn me(Extension(Actor(actor)): Extension<Actor>) -> ApiResult {
    ok(actor)
}

// Evaluation

pub async fn submit_evaluation(State(s): State<AppState>, Extension(Actor(actor)): Extension<Actor>, Body(sub): Body<EvaluationSubmission>) -> ApiResult {
    let receipt = blocking(&s, move |svc| svc.submit_evaluation(&actor, sub)).await?;
    if let Some(job) = receipt.triggered_job.clone() {
        let svc = s.svc.clone();
        tokio::spawn(async move {
            let _ = svc.run_generation(&job).await;
        });
    }
    created(receipt)
}

pub async fn list_instances(State(s): State<AppState>, Extension(Actor(actor)): Extension<Actor>) -> ApiResult {
    ok(blocking(&s, move |svc| svc.list_instances(&actor)).await?)
}

pub async fn create_instance(State(s): State<AppState>, Extension(Actor(actor)): Extension<Actor>, Body(req): Body<NewInstance>) -> ApiResult {
    created(blocking(&s, move |svc| svc.create_instance(&actor, req)).await?)
}

pub async fn instance_detail(State(s): State<AppState>, Extension(Actor(actor)): Extension<Actor>, Path(id): Path<InstanceId>) -> ApiResult {
    ok(blocking(&s, move |svc| svc.instance_detail(&actor, &id)).await?)
}

// Generation

#[derive(Debug, Default, Deserialize)]
pub struct GenerateQuery {
    #[serde(rename = "async", default)]
    background: bool,
}

pub async fn generate(
    State(s): State<AppState>,
    Extension(Actor(actor)): Extension<Actor>,
    Path(id): Path<InstanceId>,
    Query(q): Query<GenerateQuery>,
) -> ApiResult {
    let job = blocking(&s, move |svc| svc.start_generation(&actor, &id)).await?;
    if q.background {
        let svc = s.svc.clone();
        let spawned = job.clone();
        tokio::spawn(async move {
            let _ = svc.run_generation(&spawned).await;
        });
        return Ok((StatusCode::ACCEPTED, Json(job)).into_response());
    }
    created(s.svc.run_generation(&job).await?)
}

pub async fn generation_status(State(s): State<AppState>, Extension(Actor(actor)): Extension<Actor>, Path(id): Path<InstanceId>) -> ApiResult {
    let inst = id.clone();
    match blocking(&s, move |svc| svc.generation_status(&actor, &id)).await? {
        Some((job, report)) => ok(serde_json::json!({ "job": job, "report": report })),
        None => Err(AppError::not_found(format!("generation job for {inst}"))),
    }
}

// Curation

pub async fn candidates(State(s): State<AppState>, Extension(Actor(actor)): Extension<Actor>, Path(id): Path<InstanceId>) -> ApiResult {
    ok(blocking(&s, move |svc| svc.candidates(&actor, &id)).await?)
}

pub async fn compose(State(s): State<AppState>, Extension(Actor(actor)): Extension<Actor>, Path(id): Path<InstanceId>, Body(req): Body<ComposeRequest>) -> ApiResult {
    created(blocking(&s, move |svc| svc.compose(&actor, &id, req)).await?)
}

pub async fn versions(State(s): State<AppState>, Extension(Actor(actor)): Extension<Actor>, Path(id): Path<InstanceId>) -> ApiResult {
    ok(blocking(&s, move |svc| svc.versions(&actor, &id)).await?)
}

pub async fn edit(State(s): State<AppState>, Extension(Actor(actor)): Extension<Actor>, Path(id): Path<String>, Body(req): Body<EditRequest>) -> ApiResult {
    let (inst, version) = draft_id(&id)?;
    created(blocking(&s, move |svc| svc.edit(&actor, &inst, version, req)).await?)
}

/// Sends a draft. A repeated `Idempotency-Key` replays the first successful response.
pub async fn send(State(s): State<AppState>, Extension(Actor(actor)): Extension<Actor>, Path(id): Path<String>, headers: HeaderMap) -> ApiResult {
    let (inst, version) = draft_id(&id)?;
    let key = headers
        .get("idempotency-key")
        .and_then(|v| v.to_str().ok())
        .map(str::to_owned);
    let route = format!("send:{id}");
    let (status, body) = blocking(&s, move |svc| {
        if let Some(key) = &key {
            if let Some(hit) = svc.store().db.read(|r| r.idempotent_response(key, &route))? {
                return Ok(hit);
            }
        }
        let sent = svc.send(&actor, &inst, version)?;
        let body = serde_json::to_string(&sent).map_err(|e| AppError::internal(e.to_string()))?;
        if let Some(key) = &key {
            svc.store()
                .db
                .write(|r| r.save_idempotent_response(key, &route, 200, &body, chrono::Utc::now()))?;
        }
        Ok((200, body))
    })
    .await?;
    let status = StatusCode::from_u16(status).unwrap_or(StatusCode::OK);
    Ok((status, [(header::CONTENT_TYPE, HeaderValue::from_static("application/json"))], body).into_response())
}

pub async fn instance_history(State(s): State<AppState>, Extension(Actor(actor)): Extension<Actor>, Path(id): Path<InstanceId>) -> ApiResult {
    ok(blocking(&s, move |svc| svc.instance_history(&actor, &id)).await?)
}

pub async fn student_history(State(s): State<AppState>, Extension(Actor(actor)): Extension<Actor>, Path(id): Path<UserId>) -> ApiResult {
    ok(blocking(&s, move |svc| svc.student_history(&actor, &id)).await?)
}

fn media_of(headers: &HeaderMap) -> Result<(MediaKind, String), AppError> {
    let ct = headers
        .get(header::CONTENT_TYPE)
        .and_then(|v| v.to_str().ok())
        .unwrap_or_default();
    let (kind, sub) = ct
        .split(';')
        .next()
        .unwrap_or_default()
        .trim()
        .split_once('/')
        .ok_or_else(|| AppError::bad_request("content-type must be video/* or audio/*"))?;
    let kind = match kind {
        "video" => MediaKind::Video,
        "audio" => MediaKind::Audio,
        _ => return Err(AppError::bad_request("content-type must be video/* or audio/*")),
    };
    let ext: String = sub.chars().filter(char::is_ascii_alphanumeric).take(8).collect();
    Ok((kind, if ext.is_empty() { "bin".into() } else { ext }))
}

pub async fn upload_recording(
    State(s): State<AppState>,
    Extension(Actor(actor)): Extension<Actor>,
    Path(id): Path<InstanceId>,
    headers: HeaderMap,
    bytes: Bytes,
) -> ApiResult {
    let (kind, ext) = media_of(&headers)?;
    created(blocking(&s, move |svc| svc.upload_recording(&actor, &id, kind, &bytes, &ext)).await?)
}

pub async fn download_recording(State(s): State<AppState>, Extension(Actor(actor)): Extension<Actor>, Path(id): Path<InstanceId>) -> ApiResult {
    let (info, bytes) = blocking(&s, move |svc| svc.recording_bytes(&actor, &id)).await?;
    let ct = match info.media_kind {
        MediaKind::Video => "video/octet-stream",
        MediaKind::Audio => "audio/octet-stream",
    };
    let mut resp = (StatusCode::OK, bytes).into_response();
    resp.headers_mut().insert(header::CONTENT_TYPE, HeaderValue::from_static(ct));
    if let Ok(v) = HeaderValue::from_str(&info.checksum) {
        resp.headers_mut().insert("x-checksum-sha256", v);
    }
    Ok(resp)
}

// Student

pub async fn student_view(State(s): State<AppState>, Extension(Actor(actor)): Extension<Actor>, Path(id): Path<InstanceId>) -> ApiResult {
    ok(blocking(&s, move |svc| svc.student_view(&actor, &id)).await?)
}

#[derive(Debug, Deserialize)]
pub struct RatingBody {
    pub agreement: i32,
    pub usefulness: i32,
    #[serde(default)]
    pub comment: Option<String>,
}

pub async fn rate(State(s): State<AppState>, Extension(Actor(actor)): Extension<Actor>, Path(version_id): Path<String>, Body(b): Body<RatingBody>) -> ApiResult {
    let (inst, version) = draft_id(&version_id)?;
    let req = RatingRequest {
        version,
        agreement: b.agreement,
        usefulness: b.usefulness,
        comment: b.comment,
    };
    created(blocking(&s, move |svc| svc.rate(&actor, &inst, req)).await?)
}

// Administration

pub async fn list_users(State(s): State<AppState>, Extension(Actor(actor)): Extension<Actor>) -> ApiResult {
    ok(blocking(&s, move |svc| svc.list_users(&actor)).await?)
}

pub async fn create_user(State(s): State<AppState>, Extension(Actor(actor)): Extension<Actor>, Body(user): Body<User>) -> ApiResult {
    created(blocking(&s, move |svc| svc.create_user(&actor, user)).await?)
}

pub async fn issue_token(State(s): State<AppState>, Extension(Actor(actor)): Extension<Actor>, Body(req): Body<TokenRequest>) -> ApiResult {
    let user_id = req.user_id.clone();
    blocking(&s, move |svc| svc.issue_token(&actor, &req)).await?;
    created(serde_json::json!({ "user_id": user_id }))
}

pub async fn list_courses(State(s): State<AppState>, Extension(Actor(actor)): Extension<Actor>) -> ApiResult {
    ok(blocking(&s, move |svc| svc.list_courses(&actor)).await?)
}

pub async fn create_course(State(s): State<AppState>, Extension(Actor(actor)): Extension<Actor>, Body(course): Body<Course>) -> ApiResult {
    created(blocking(&s, move |svc| svc.create_course(&actor, course)).await?)
}

#[derive(Debug, Deserialize)]
pub struct TeacherBody {
    pub user_id: UserId,
}

pub async fn add_teacher(State(s): State<AppState>, Extension(Actor(actor)): Extension<Actor>, Path(id): Path<CourseId>, Body(b): Body<TeacherBody>) -> ApiResult {
    blocking(&s, move |svc| svc.add_teacher(&actor, &id, &b.user_id)).await?;
    created(serde_json::json!({ "linked": true }))
}

pub async fn set_language(State(s): State<AppState>, Extension(Actor(actor)): Extension<Actor>, Path(id): Path<CourseId>, Body(req): Body<LanguageRequest>) -> ApiResult {
    ok(blocking(&s, move |svc| svc.set_course_language(&actor, &id, &req)).await?)
}

pub async fn put_template(State(s): State<AppState>, Extension(Actor(actor)): Extension<Actor>, Path(id): Path<CourseId>, Body(t): Body<PromptTemplate>) -> ApiResult {
    ok(blocking(&s, move |svc| svc.put_template(&actor, &id, t)).await?)
}

pub async fn put_policy(State(s): State<AppState>, Extension(Actor(actor)): Extension<Actor>, Path(id): Path<CourseId>, Body(p): Body<ValidationPolicy>) -> ApiResult {
    ok(blocking(&s, move |svc| svc.put_policy(&actor, &id, p)).await?)
}

#[derive(Debug, Deserialize)]
pub struct AssignBody {
    pub rubric_id: RubricId,
}

pub async fn assign_rubric(State(s): State<AppState>, Extension(Actor(actor)): Extension<Actor>, Path(id): Path<CourseId>, Body(b): Body<AssignBody>) -> ApiResult {
    ok(blocking(&s, move |svc| svc.assign_rubric(&actor, &id, &b.rubric_id)).await?)
}

pub async fn add_material(State(s): State<AppState>, Extension(Actor(actor)): Extension<Actor>, Path(id): Path<CourseId>, Body(mut m): Body<Material>) -> ApiResult {
    m.course_id = id;
    created(blocking(&s, move |svc| svc.add_material(&actor, m)).await?)
}

pub async fn create_group(State(s): State<AppState>, Extension(Actor(actor)): Extension<Actor>, Body(g): Body<Group>) -> ApiResult {
    created(blocking(&s, move |svc| svc.create_group(&actor, g)).await?)
}

pub async fn add_member(State(s): State<AppState>, Extension(Actor(actor)): Extension<Actor>, Path(id): Path<GroupId>, Body(req): Body<MemberRequest>) -> ApiResult {
    ok(blocking(&s, move |svc| svc.add_group_member(&actor, &id, &req)).await?)
}

pub async fn list_rubrics(State(s): State<AppState>, Extension(Actor(actor)): Extension<Actor>) -> ApiResult {
    ok(blocking(&s, move |svc| svc.list_rubrics(&actor)).await?)
}

pub async fn create_rubric(State(s): State<AppState>, Extension(Actor(actor)): Extension<Actor>, Body(r): Body<Rubric>) -> ApiResult {
    created(blocking(&s, move |svc| svc.create_rubric(&actor, r)).await?)
}

pub async fn set_relevance_terms(
    State(s): State<AppState>,
    Extension(Actor(actor)): Extension<Actor>,
    Path((id, item)): Path<(RubricId, ItemId)>,
    Body(req): Body<RelevanceRequest>,
) -> ApiResult {
    ok(blocking(&s, move |svc| svc.set_relevance_terms(&actor, &id, &item, &req)).await?)
}
