//! HTTP surface. One route table drives the router, role checks and the OpenAPI document.

mod handlers;
pub mod openapi;
mod routes;

use std::sync::Arc;

use aicofe_core::model::{Role, User};
use axum::extract::{FromRequest, MatchedPath, Request, State};
use axum::http::{header, Method, StatusCode};
use axum::middleware::{self, Next};
use axum::response::{IntoResponse, Response};
use axum::{Json, Router};
use serde::de::DeserializeOwned;
use tower_http::trace::TraceLayer;

use crate::error::AppError;
use crate::service::Service;

pub use routes::{routes, Access, RouteSpec};

#[derive(Clone)]
pub struct AppState {
    pub svc: Arc<Service>,
}

/// The authenticated caller, placed in request extensions by the auth layer.
#[derive(Debug, Clone)]
pub struct Actor(pub User);

impl AppError {
    pub fn status(&self) -> StatusCode {
        match self {
            AppError::Unauthorized => StatusCode::UNAUTHORIZED,
            AppError::Forbidden { .. } => StatusCode::FORBIDDEN,
            AppError::NotFound { .. } => StatusCode::NOT_FOUND,
            AppError::Conflict { .. } => StatusCode::CONFLICT,
            AppError::Invalid { .. } => StatusCode::UNPROCESSABLE_ENTITY,
            AppError::BadRequest { .. } => StatusCode::BAD_REQUEST,
            AppError::Generation { .. } => StatusCode::BAD_GATEWAY,
            AppError::Internal { .. } => StatusCode::INTERNAL_SERVER_ERROR,
        }
    }
}

impl IntoResponse for AppError {
    fn into_response(self) -> Response {
        if let AppError::Internal { message } = &self {
            tracing::error!(%message, "internal error");
        }
        let mut body = serde_json::to_value(&self).unwrap_or_default();
        body["message"] = serde_json::Value::String(self.to_string());
        let mut resp = (self.status(), Json(body)).into_response();
        if matches!(self, AppError::Unauthorized) {
            resp.headers_mut()
                .insert(header::WWW_AUTHENTICATE, header::HeaderValue::from_static("Bearer"));
        }
        resp
    }
}

/// JSON body whose rejections use the service error shape.
pub struct Body<T>(pub T);

#[axum::async_trait]
impl<T: DeserializeOwned, S: Send + Sync> FromRequest<S> for Body<T> {
    type Rejection = AppError;

    async fn from_request(req: Request, state: &S) -> Result<Self, Self::Rejection> {
        match Json::<T>::from_request(req, state).await {
            Ok(Json(v)) => Ok(Body(v)),
            Err(e) => Err(AppError::bad_request(e.body_text())),
        }
    }
}

fn bearer(req: &Request) -> Option<&str> {
    req.headers()
        .get(header::AUTHORIZATION)?
        .to_str()
        .ok()?
        .strip_prefix("Bearer ")
        .map(str::trim)
}

/// Resolves the route's access rule, authenticates and checks the role.
async fn authorize(State(state): State<AppState>, mut req: Request, next: Next) -> Response {
    let path = req.extensions().get::<MatchedPath>().map(|p| p.as_str().to_owned());
    let method = req.method().clone();
    let access = path
        .as_deref()
        .and_then(|p| routes().into_iter().find(|r| r.path == p && r.method == method))
        .map(|r| r.access);
    let Some(access) = access else {
        return AppError::not_found("route").into_response();
    };
    if access == Access::Public {
        return next.run(req).await;
    }
    let Some(token) = bearer(&req).map(str::to_owned) else {
        return AppError::Unauthorized.into_response();
    };
    let svc = state.svc.clone();
    let user = tokio::task::spawn_blocking(move || svc.store().db.read(|r| r.user_for_token(&token, chrono::Utc::now())))
        .await;
    let user = match user {
        Ok(Ok(Some(u))) => u,
        Ok(Ok(None)) => return AppError::Unauthorized.into_response(),
        Ok(Err(e)) => return AppError::from(e).into_response(),
        Err(e) => return AppError::internal(e.to_string()).into_response(),
    };
    if !access.allows(user.role) {
        return AppError::forbidden(format!("role {} may not call {method} {}", user.role.as_str(), path.unwrap_or_default()))
            .into_response();
    }
    req.extensions_mut().insert(Actor(user));
    next.run(req).await
}

async fn fallback(method: Method, uri: axum::http::Uri) -> Response {
    (
        StatusCode::NOT_FOUND,
        Json(serde_json::json!({
            "error": "route_not_found",
            "message": format!("no route for {method} {}", uri.path()),
        })),
    )
        .into_response()
}

/// The full application router.
pub fn router(svc: Arc<Service>) -> Router {
    let state = AppState { svc };
    let mut app: Router<AppState> = Router::new();
    for spec in routes() {
        app = app.route(spec.path, (spec.mount)());
    }
    app.route_layer(middleware::from_fn_with_state(state.clone(), authorize))
        .fallback(fallback)
        .layer(TraceLayer::new_for_http())
        .with_state(state)
}

/// Runs a blocking service call off the async executor.
pub(crate) async fn blocking<T, F>(state: &AppState, f: F) -> Result<T, AppError>
where
    T: Send + 'static,
    F: FnOnce(&Service) -> Result<T, AppError> + Send + 'static,
{
    let svc = state.svc.clone();
    tokio::task::spawn_blocking(move || f(&svc))
        .await
        .map_err(|e| AppError::internal(e.to_string()))?
}

impl Access {
    pub fn allows(self, role: Role) -> bool {
        match self {
            Access::Public => true,
            Access::Roles(roles) => roles.contains(&role),
        }
    }
}
