//! Record real responses as JSON fixtures and replay them offline.
//!
//! Fixtures live at `{dir}/{provider_id}/{prompt_digest}.json`.

use std::path::{Path, PathBuf};
use std::sync::Arc;

use async_trait::async_trait;
use serde::{Deserialize, Serialize};

use crate::descriptor::ProviderDescriptor;
use crate::error::ProviderError;
use crate::provider::{prompt_digest, Provider};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Fixture {
    pub provider_id: String,
    pub prompt_digest: String,
    pub prompt: String,
    pub response: String,
}

pub fn fixture_path(dir: &Path, provider_id: &str, prompt: &str) -> PathBuf {
    dir.join(provider_id).join(format!("{}.json", prompt_digest(prompt)))
}

/// Forwards to an inner provider and saves every successful response.
pub struct RecordingProvider {
    inner: Arc<dyn Provider>,
    dir: PathBuf,
}

impl RecordingProvider {
    pub fn new(inner: Arc<dyn Provider>, dir: impl Into<PathBuf>) -> Self {
        Self { inner, dir: dir.into() }
    }
}

#[async_trait]
impl Provider for RecordingProvider {
    fn descriptor(&self) -> &ProviderDescriptor {
        self.inner.descriptor()
    }

    async fn complete(&self, prompt: &str) -> Result<String, ProviderError> {
        let response = self.inner.complete(prompt).await?;
        let id = &self.inner.descriptor().id;
        let fixture = Fixture {
            provider_id: id.clone(),
            prompt_digest: prompt_digest(prompt),
            prompt: prompt.to_owned(),
            response: response.clone(),
        };
        let path = fixture_path(&self.dir, id, prompt);
        let json = serde_json::to_vec_pretty(&fixture).map_err(|e| ProviderError::Other(e.to_string()))?;
        let write = async {
            tokio::fs::create_dir_all(path.parent().expect("fixture path has a parent")).await?;
            tokio::fs::write(&path, json).await
        };
        write
            .await
            .map_err(|e| ProviderError::Other(format!("cannot record fixture {}: {e}", path.display())))?;
        Ok(response)
    }
}

/// Answers from recorded fixtures only.
pub struct ReplayProvider {
    descriptor: ProviderDescriptor,
    dir: PathBuf,
}

impl ReplayProvider {
    pub fn new(descriptor: ProviderDescriptor, dir: impl Into<PathBuf>) -> Self {
        Self {
            descriptor,
            dir: dir.into(),
        }
    }
}

#[async_trait]
impl Provider for ReplayProvider {
    fn descriptor(&self) -> &ProviderDescriptor {
        &self.descriptor
    }

    async fn complete(&self, prompt: &str) -> Result<String, ProviderError> {
        let path = fixture_path(&self.dir, &self.descriptor.id, prompt);
        let bytes = tokio::fs::read(&path)
            .await
            .map_err(|_| ProviderError::Other(format!("no fixture at {}", path.display())))?;
        let fixture: Fixture =
            serde_json::from_slice(&bytes).map_err(|e| ProviderError::Malformed(format!("{}: {e}", path.display())))?;
        if fixture.prompt_digest != prompt_digest(prompt) {
            return Err(ProviderError::Malformed(format!("{} was recorded for another prompt", path.display())));
        }
        Ok(fixture.response)
    }
}
