use async_trait::async_trait;
use serde_json::{json, Value};

use super::{credential, map_status, map_transport};
use crate::descriptor::{Endpoint, ProviderDescriptor};
use crate::error::ProviderError;
use crate::provider::Provider;

/// `generateContent` client for the Gemini API.
pub struct GeminiProvider {
    descriptor: ProviderDescriptor,
    client: reqwest::Client,
}

impl GeminiProvider {
    pub fn new(descriptor: ProviderDescriptor, client: reqwest::Client) -> Self {
        Self { descriptor, client }
    }
}

#[async_trait]
impl Provider for GeminiProvider {
    fn descriptor(&self) -> &ProviderDescriptor {
        &self.descriptor
    }

    async fn complete(&self, prompt: &str) -> Result<String, ProviderError> {
        let Endpoint::Gemini {
            base_url,
            model,
            api_key_env,
            temperature,
            max_output_tokens,
        } = &self.descriptor.endpoint
        else {
            return Err(ProviderError::Other("not a Gemini endpoint".into()));
        };
        let key = credential(api_key_env)?;
        let url = format!("{}/v1beta/models/{model}:generateContent", base_url.trim_end_matches('/'));
        let body = json!({
            "contents": [{ "role": "user", "parts": [{ "text": prompt }] }],
            "generationConfig": { "temperature": temperature, "maxOutputTokens": max_output_tokens },
        });
        let resp = self
            .client
            .post(url)
            .header("x-goog-api-key", key)
            .json(&body)
            .send()
            .await
            .map_err(map_transport)?;
        let status = resp.status();
        let text = resp.text().await.map_err(map_transport)?;
        if !status.is_success() {
            return Err(map_status(status, text));
        }
        let v: Value = serde_json::from_str(&text).map_err(|e| ProviderError::Malformed(e.to_string()))?;
        let parts = v
            .pointer("/candidates/0/content/parts")
            .and_then(Value::as_array)
            .ok_or_else(|| ProviderError::Malformed("missing candidates[0].content.parts".into()))?;
        Ok(parts.iter().filter_map(|p| p.get("text").and_then(Value::as_str)).collect())
    }
}
