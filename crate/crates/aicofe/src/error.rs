use aicofe_gateway::GatewayError;
use aicofe_store::StoreError;
use serde::Serialize;

pub type Result<T, E = AppError> = std::result::Result<T, E>;

/// Service-level failure, mapped one-to-one onto HTTP statuses by the API.
#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error, Serialize)]
#[serde(tag = "error", rename_all = "snake_case")]
pub enum AppError {
    #[error("unauthorized")]
    Unauthorized,
    #[error("forbidden: {message}")]
    Forbidden { message: String },
    #[error("not found: {message}")]
    NotFound { message: String },
    #[error("conflict: {message}")]
    Conflict { message: String },
    #[error("invalid: {message}")]
    Invalid {
        message: String,
        #[serde(skip_serializing_if = "Option::is_none")]
        item_id: Option<String>,
    },
    #[error("bad request: {message}")]
    BadRequest { message: String },
    #[error("generation failed: {message}")]
    Generation { message: String },
    #[error("internal error: {message}")]
    Internal { message: String },
}

impl AppError {
    pub fn forbidden(m: impl Into<String>) -> Self {
        AppError::Forbidden { message: m.into() }
    }

    pub fn not_found(m: impl Into<String>) -> Self {
        AppError::NotFound { message: m.into() }
    }

    pub fn conflict(m: impl Into<String>) -> Self {
        AppError::Conflict { message: m.into() }
    }

    pub fn invalid(m: impl Into<String>) -> Self {
        AppError::Invalid {
            message: m.into(),
            item_id: None,
        }
    }

    pub fn bad_request(m: impl Into<String>) -> Self {
        AppError::BadRequest { message: m.into() }
    }

    pub fn internal(m: impl Into<String>) -> Self {
        AppError::Internal { message: m.into() }
    }
}

impl From<aicofe_core::Error> for AppError {
    fn from(e: aicofe_core::Error) -> Self {
        use aicofe_core::Error as E;
        match e {
            E::NotFound(m) => AppError::NotFound { message: m },
            E::State(m) => AppError::Conflict { message: m },
            E::ScoreOutOfRange { ref item, .. } => AppError::Invalid {
                item_id: Some(item.clone()),
                message: e.to_string(),
            },
            E::Domain(m) | E::Validation(m) | E::Config(m) => AppError::Invalid {
                message: m,
                item_id: None,
            },
        }
    }
}

impl From<StoreError> for AppError {
    fn from(e: StoreError) -> Self {
        match e {
            StoreError::Domain(d) => d.into(),
            StoreError::NotFound(m) => AppError::NotFound { message: m },
            StoreError::Conflict(m) => AppError::Conflict { message: m },
            StoreError::Constraint(m) if m.contains("score outside") => AppError::invalid(m),
            StoreError::Constraint(m) => AppError::Conflict { message: m },
            StoreError::Schema(m) => AppError::Invalid {
                message: m,
                item_id: None,
            },
            other => AppError::internal(other.to_string()),
        }
    }
}

impl From<GatewayError> for AppError {
    fn from(e: GatewayError) -> Self {
        match e {
            GatewayError::Config(m) => AppError::internal(m),
            other => AppError::Generation { message: other.to_string() },
        }
    }
}
