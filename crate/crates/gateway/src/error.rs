use thiserror::Error;

use crate::provider::GenerationResult;

/// Failure of a single provider request.
#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ProviderError {
    #[error("request timed out after {0} ms")]
    Timeout(u64),
    #[error("HTTP {status}: {body}")]
    Http { status: u16, body: String },
    #[error("rate limited by provider")]
    RateLimited,
    #[error("transport error: {0}")]
    Transport(String),
    #[error("malformed response: {0}")]
    Malformed(String),
    #[error("missing credential: environment variable {0} is not set")]
    MissingCredential(String),
    #[error("{0}")]
    Other(String),
}

impl ProviderError {
    /// Whether another attempt may succeed.
    pub fn is_retryable(&self) -> bool {
        match self {
            Self::Timeout(_) | Self::RateLimited | Self::Transport(_) => true,
            Self::Http { status, .. } => *status == 408 || *status == 429 || *status >= 500,
            Self::Malformed(_) | Self::MissingCredential(_) | Self::Other(_) => false,
        }
    }
}

#[derive(Debug, Error)]
pub enum GatewayError {
    #[error("no providers configured")]
    NoProviders,
    #[error("no candidates produced")]
    NoCandidates(Vec<GenerationResult>),
    #[error("outbound prompt rejected: {0}")]
    Guard(String),
    #[error("invalid provider configuration: {0}")]
    Config(String),
}
