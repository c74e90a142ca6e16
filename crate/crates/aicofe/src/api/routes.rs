use aicofe_core::model::Role;
use axum::http::Method;
use axum::routing::{get, post, put, MethodRouter};

use super::{handlers as h, AppState};

/// Who may call a route.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Access {
    Public,
    Roles(&'static [Role]),
}

const ANY: Access = Access::Roles(&[Role::Student, Role::Teacher, Role::Admin]);
const STUDENT: Access = Access::Roles(&[Role::Student]);
const TEACHER: Access = Access::Roles(&[Role::Teacher]);
const ADMIN: Access = Access::Roles(&[Role::Admin]);
const EVALUATOR: Access = Access::Roles(&[Role::Student, Role::Teacher]);
const STAFF: Access = Access::Roles(&[Role::Teacher, Role::Admin]);

pub struct RouteSpec {
    pub method: Method,
    /// Axum path syntax (`:param`).
    pub path: &'static str,
    pub access: Access,
    pub summary: &'static str,
    /// Status returned on success.
    pub status: u16,
    pub mount: fn() -> MethodRouter<AppState>,
}

macro_rules! route {
    ($m:ident, $method:ident, $path:literal, $access:expr, $status:literal, $summary:literal, $handler:path) => {
        RouteSpec {
            method: Method::$method,
            path: $path,
            access: $access,
            summary: $summary,
            status: $status,
            mount: || $m($handler),
        }
    };
}

/// Every route of the service.
pub fn routes() -> Vec<RouteSpec> {
    vec![
        route!(get, GET, "/health", Access::Public, 200, "Liveness probe", h::health),
        route!(get, GET, "/ready", Access::Public, 200, "Readiness probe: stores reachable", h::ready),
        route!(get, GET, "/openapi.json", Access::Public, 200, "This API description", h::openapi),
        route!(get, GET, "/me", ANY, 200, "The authenticated user", h::me),
        // Evaluation
        route!(post, POST, "/evaluations", EVALUATOR, 201, "Submit scores, comments and interaction events", h::submit_evaluation),
        route!(get, GET, "/instances", EVALUATOR, 200, "Instances visible to the caller", h::list_instances),
        route!(post, POST, "/instances", STAFF, 201, "Create an evaluation instance", h::create_instance),
        route!(get, GET, "/instances/:id", TEACHER, 200, "Scores, comments, jobs and versions of an instance", h::instance_detail),
        // Generation
        route!(post, POST, "/instances/:id/generate", TEACHER, 201, "Generate candidates; ?async=true returns the job right away", h::generate),
        route!(get, GET, "/instances/:id/generation", TEACHER, 200, "Latest generation job and its report", h::generation_status),
        // Curation
        route!(get, GET, "/instances/:id/candidates", TEACHER, 200, "Feedback candidates with sentence ids", h::candidates),
        route!(post, POST, "/instances/:id/compose", TEACHER, 201, "Compose a draft from selected sentences", h::compose),
        route!(get, GET, "/instances/:id/drafts", TEACHER, 200, "All feedback versions, newest first", h::versions),
        route!(post, POST, "/drafts/:id/edit", TEACHER, 201, "Edit one sentence into a new draft version", h::edit),
        route!(post, POST, "/drafts/:id/send", TEACHER, 200, "Send a draft; honours Idempotency-Key", h::send),
        route!(get, GET, "/instances/:id/history", TEACHER, 200, "Sent feedback of one instance", h::instance_history),
        route!(get, GET, "/students/:id/history", TEACHER, 200, "Sent feedback across a student's instances", h::student_history),
        route!(put, PUT, "/instances/:id/recording", TEACHER, 201, "Upload the session recording (raw video/* or audio/* body)", h::upload_recording),
        route!(get, GET, "/instances/:id/recording", EVALUATOR, 200, "Download the session recording", h::download_recording),
        // Student
        route!(get, GET, "/instances/:id/student-view", STUDENT, 200, "Aggregate, self comparison and sent feedback", h::student_view),
        route!(post, POST, "/feedback/:version_id/rating", STUDENT, 201, "Rate agreement and usefulness of sent feedback", h::rate),
        // Administration
        route!(get, GET, "/users", ADMIN, 200, "List users", h::list_users),
        route!(post, POST, "/users", ADMIN, 201, "Create a user", h::create_user),
        route!(post, POST, "/tokens", ADMIN, 201, "Issue an API token", h::issue_token),
        route!(get, GET, "/courses", STAFF, 200, "Courses the caller administers or teaches", h::list_courses),
        route!(post, POST, "/courses", ADMIN, 201, "Create a course", h::create_course),
        route!(post, POST, "/courses/:id/teachers", ADMIN, 201, "Link a teacher to a course", h::add_teacher),
        route!(put, PUT, "/courses/:id/language", ADMIN, 200, "Set the feedback language and UI locale hint", h::set_language),
        route!(put, PUT, "/courses/:id/template", ADMIN, 200, "Set the course prompt template", h::put_template),
        route!(put, PUT, "/courses/:id/policy", ADMIN, 200, "Set the course validation policy", h::put_policy),
        route!(post, POST, "/courses/:id/rubrics", ADMIN, 200, "Assign a rubric to a course", h::assign_rubric),
        route!(post, POST, "/courses/:id/materials", ADMIN, 201, "Attach instructional material", h::add_material),
        route!(post, POST, "/groups", ADMIN, 201, "Create a student group", h::create_group),
        route!(post, POST, "/groups/:id/members", ADMIN, 200, "Add a student to a group with consent flag", h::add_member),
        route!(get, GET, "/rubrics", ADMIN, 200, "List rubrics", h::list_rubrics),
        route!(post, POST, "/rubrics", ADMIN, 201, "Create a rubric", h::create_rubric),
        route!(put, PUT, "/rubrics/:id/items/:item_id/relevance-terms", ADMIN, 200, "Replace an item's relevance terms", h::set_relevance_terms),
    ]
}
