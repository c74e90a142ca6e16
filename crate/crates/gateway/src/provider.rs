use aicofe_core::curation::FeedbackSource;
use aicofe_core::model::InstanceId;
use async_trait::async_trait;
use serde::{Deserialize, Serialize};

use crate::descriptor::ProviderDescriptor;
use crate::error::ProviderError;

/// A text-completion backend.
#[async_trait]
pub trait Provider: Send + Sync {
    fn descriptor(&self) -> &ProviderDescriptor;

    /// One request, no retries. Timeouts are enforced by the caller.
    async fn complete(&self, prompt: &str) -> Result<String, ProviderError>;
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Outcome {
    Ok,
    ProviderError,
    Timeout,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct GenerationResult {
    pub provider_id: String,
    pub lane: FeedbackSource,
    pub instance_id: InstanceId,
    pub prompt_digest: String,
    /// Empty unless `outcome` is `ok`.
    pub raw_text: String,
    pub latency_ms: u64,
    /// Attempts made, starting at 1.
    pub attempt: u32,
    pub outcome: Outcome,
    /// Final error when the outcome is not ok.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

impl GenerationResult {
    pub fn is_ok(&self) -> bool {
        self.outcome == Outcome::Ok
    }
}

/// Hex SHA-256 of the prompt text.
pub fn prompt_digest(prompt: &str) -> String {
    use sha2::{Digest, Sha256};
    hex::encode(Sha256::digest(prompt.as_bytes()))
}
