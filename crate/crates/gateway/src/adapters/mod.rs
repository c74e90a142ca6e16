//! HTTP clients for the vendor chat-completion protocols.

mod gemini;
mod openai;

use std::sync::Arc;

pub use gemini::GeminiProvider;
pub use openai::OpenAiProvider;

use crate::descriptor::{Endpoint, ProviderDescriptor};
use crate::error::{GatewayError, ProviderError};
use crate::mock::MockProvider;
use crate::provider::Provider;
use crate::replay::ReplayProvider;

fn credential(var: &str) -> Result<String, ProviderError> {
    std::env::var(var)
        .ok()
        .filter(|v| !v.is_empty())
        .ok_or_else(|| ProviderError::MissingCredential(var.to_owned()))
}

fn map_status(status: reqwest::StatusCode, body: String) -> ProviderError {
    if status == reqwest::StatusCode::TOO_MANY_REQUESTS {
        ProviderError::RateLimited
    } else {
        ProviderError::Http {
            status: status.as_u16(),
            body: body.chars().take(500).collect(),
        }
    }
}

fn map_transport(e: reqwest::Error) -> ProviderError {
    if e.is_timeout() {
        ProviderError::Timeout(0)
    } else {
        ProviderError::Transport(e.to_string())
    }
}

/// Builds the provider a descriptor describes. Credentials are read from the
/// environment at call time, so a missing key surfaces as a provider error.
pub fn build_provider(descriptor: ProviderDescriptor, client: reqwest::Client) -> Result<Arc<dyn Provider>, GatewayError> {
    descriptor.validate()?;
    Ok(match &descriptor.endpoint {
        Endpoint::OpenAi { .. } | Endpoint::OpenAiCompatible { .. } => Arc::new(OpenAiProvider::new(descriptor, client)),
        Endpoint::Gemini { .. } => Arc::new(GeminiProvider::new(descriptor, client)),
        Endpoint::Mock { .. } => Arc::new(MockProvider::from_descriptor(descriptor)),
        Endpoint::Replay { dir } => {
            let dir = dir.clone();
            Arc::new(ReplayProvider::new(descriptor, dir))
        }
    })
}
