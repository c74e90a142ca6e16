use async_trait::async_trait;
use serde_json::{json, Value};

use super::{credential, map_status, map_transport};
use crate::descriptor::{Endpoint, ProviderDescriptor};
use crate::error::ProviderError;
use crate::provider::Provider;

/// Chat-completions client for OpenAI and OpenAI-compatible servers.
pub struct OpenAiProvider {
    descriptor: ProviderDescriptor,
    client: reqwest::Client,
}

impl OpenAiProvider {
    pub fn new(descriptor: ProviderDescriptor, client: reqwest::Client) -> Self {
        Self { descriptor, client }
    }
}

#[async_trait]
impl Provider for OpenAiProvider {
    fn descriptor(&self) -> &ProviderDescriptor {
        &self.descriptor
    }

    async fn complete(&self, prompt: &str) -> Result<String, ProviderError> {
        let (base_url, model, key, temperature, max_tokens) = match &self.descriptor.endpoint {
            Endpoint::OpenAi {
                base_url,
                model,
                api_key_env,
                temperature,
                max_output_tokens,
            } => (base_url, model, Some(credential(api_key_env)?), temperature, max_output_tokens),
            Endpoint::OpenAiCompatible {
                base_url,
                model,
                api_key_env,
                temperature,
                max_output_tokens,
            } => (
                base_url,
                model,
                api_key_env.as_deref().and_then(|v| credential(v).ok()),
                temperature,
                max_output_tokens,
            ),
            other => return Err(ProviderError::Other(format!("not an OpenAI endpoint: {other:?}"))),
        };
        let url = format!("{}/v1/chat/completions", base_url.trim_end_matches('/'));
        let body = json!({
            "model": model,
            "messages": [{ "role": "user", "content": prompt }],
            "temperature": temperature,
            "max_tokens": max_tokens,
        });
        let mut req = self.client.post(url).json(&body);
        if let Some(key) = key {
            req = req.bearer_auth(key);
        }
        let resp = req.send().await.map_err(map_transport)?;
        let status = resp.status();
        let text = resp.text().await.map_err(map_transport)?;
        if !status.is_success() {
            return Err(map_status(status, text));
        }
        let v: Value = serde_json::from_str(&text).map_err(|e| ProviderError::Malformed(e.to_string()))?;
        v.pointer("/choices/0/message/content")
            .and_then(Value::as_str)
            .map(str::to_owned)
            .ok_or_else(|| ProviderError::Malformed("missing choices[0].message.content".into()))
    }
}
