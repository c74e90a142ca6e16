use std::time::Duration;

use aicofe_core::curation::FeedbackSource;
use serde::{Deserialize, Serialize};

use crate::error::GatewayError;

/// Exponential backoff with full jitter: attempt `n` sleeps a uniform draw
/// from `[0, min(max_ms, base_ms * factor^(n-1))]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Backoff {
    pub base_ms: u64,
    pub factor: f64,
    pub max_ms: u64,
}

impl Default for Backoff {
    fn default() -> Self {
        Self {
            base_ms: 1000,
            factor: 2.0,
            max_ms: 30_000,
        }
    }
}

impl Backoff {
    pub fn ceiling(&self, attempt: u32) -> Duration {
        let exp = self.factor.powi(attempt.saturating_sub(1) as i32);
        let ms = (self.base_ms as f64 * exp).min(self.max_ms as f64);
        Duration::from_millis(ms as u64)
    }
}

/// Token bucket: `burst` calls at once, refilled at `per_second`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RateLimit {
    pub per_second: f64,
    pub burst: u32,
}

/// Wire protocol and connection settings of a provider.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Endpoint {
    OpenAi {
        #[serde(default = "openai_base")]
        base_url: String,
        model: String,
        api_key_env: String,
        #[serde(default = "default_temperature")]
        temperature: f64,
        #[serde(default = "default_max_tokens")]
        max_output_tokens: u32,
    },
    Gemini {
        #[serde(default = "gemini_base")]
        base_url: String,
        model: String,
        api_key_env: String,
        #[serde(default = "default_temperature")]
        temperature: f64,
        #[serde(default = "default_max_tokens")]
        max_output_tokens: u32,
    },
    /// Any server speaking the OpenAI chat-completions protocol, e.g. a local
    /// Llama deployment.
    OpenAiCompatible {
        base_url: String,
        model: String,
        #[serde(default)]
        api_key_env: Option<String>,
        #[serde(default = "default_temperature")]
        temperature: f64,
        #[serde(default = "default_max_tokens")]
        max_output_tokens: u32,
    },
    /// Deterministic offline provider that fills feedback templates from the prompt.
    Mock {
        #[serde(default)]
        seed: u64,
        #[serde(default)]
        latency_ms: u64,
    },
    /// Replays responses captured by a recording provider.
    Replay { dir: String },
}

fn openai_base() -> String {
    "https://api.openai.com".to_owned()
}

fn gemini_base() -> String {
    "https://generativelanguage.googleapis.com".to_owned()
}

fn default_temperature() -> f64 {
    0.7
}

fn default_max_tokens() -> u32 {
    1024
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProviderDescriptor {
    pub id: String,
    pub display_name: String,
    /// Attribution lane of the text this provider produces.
    pub lane: FeedbackSource,
    pub endpoint: Endpoint,
    #[serde(default = "default_timeout")]
    pub timeout_ms: u64,
    #[serde(default = "default_attempts")]
    pub max_attempts: u32,
    #[serde(default)]
    pub backoff: Backoff,
    #[serde(default)]
    pub rate_limit: Option<RateLimit>,
}

fn default_timeout() -> u64 {
    60_000
}

fn default_attempts() -> u32 {
    3
}

impl ProviderDescriptor {
    pub fn new(id: impl Into<String>, lane: FeedbackSource, endpoint: Endpoint) -> Self {
        let id = id.into();
        Self {
            display_name: id.clone(),
            id,
            lane,
            endpoint,
            timeout_ms: default_timeout(),
            max_attempts: default_attempts(),
            backoff: Backoff::default(),
            rate_limit: None,
        }
    }

    pub fn timeout(&self) -> Duration {
        Duration::from_millis(self.timeout_ms)
    }

    pub fn validate(&self) -> Result<(), GatewayError> {
        if self.id.trim().is_empty() {
            return Err(GatewayError::Config("provider id must not be empty".into()));
        }
        if self.timeout_ms == 0 {
            return Err(GatewayError::Config(format!("provider {}: timeout must be positive", self.id)));
        }
        if self.max_attempts == 0 {
            return Err(GatewayError::Config(format!("provider {}: max_attempts must be at least 1", self.id)));
        }
        if self.lane == FeedbackSource::Teacher {
            return Err(GatewayError::Config(format!("provider {}: lane must be an LLM source", self.id)));
        }
        if let Some(rl) = self.rate_limit {
            if rl.per_second <= 0.0 || rl.burst == 0 {
                return Err(GatewayError::Config(format!("provider {}: invalid rate limit", self.id)));
            }
        }
        Ok(())
    }
}

/// The three production providers: GPT-4.1-mini, Gemini 2.5 Flash and Llama 3.1.
///
/// Credentials come from `OPENAI_API_KEY`, `GEMINI_API_KEY` and the optional
/// `LLAMA_API_KEY`; the Llama server defaults to a local endpoint.
pub fn default_descriptors() -> Vec<ProviderDescriptor> {
    vec![
        ProviderDescriptor {
            display_name: "GPT-4.1-mini".into(),
            ..ProviderDescriptor::new(
                "gpt-4.1-mini",
                FeedbackSource::Gpt,
                Endpoint::OpenAi {
                    base_url: openai_base(),
                    model: "gpt-4.1-mini".into(),
                    api_key_env: "OPENAI_API_KEY".into(),
                    temperature: default_temperature(),
                    max_output_tokens: default_max_tokens(),
                },
            )
        },
        ProviderDescriptor {
            display_name: "Gemini 2.5 Flash".into(),
            ..ProviderDescriptor::new(
                "gemini-2.5-flash",
                FeedbackSource::Gemini,
                Endpoint::Gemini {
                    base_url: gemini_base(),
                    model: "gemini-2.5-flash".into(),
                    api_key_env: "GEMINI_API_KEY".into(),
                    temperature: default_temperature(),
                    max_output_tokens: default_max_tokens(),
                },
            )
        },
        ProviderDescriptor {
            display_name: "Llama 3.1".into(),
            ..ProviderDescriptor::new(
                "llama-3.1",
                FeedbackSource::Llama,
                Endpoint::OpenAiCompatible {
                    base_url: "http://localhost:11434".into(),
                    model: "llama3.1".into(),
                    api_key_env: Some("LLAMA_API_KEY".into()),
                    temperature: default_temperature(),
                    max_output_tokens: default_max_tokens(),
                },
            )
        },
    ]
}

/// One mock descriptor per LLM lane, ids prefixed `mock-`.
pub fn mock_descriptors(latency_ms: u64) -> Vec<ProviderDescriptor> {
    [FeedbackSource::Gpt, FeedbackSource::Gemini, FeedbackSource::Llama]
        .into_iter()
        .enumerate()
        .map(|(i, lane)| {
            let mut d = ProviderDescriptor::new(
                format!("mock-{}", lane.as_str()),
                lane,
                Endpoint::Mock {
                    seed: i as u64 + 1,
                    latency_ms,
                },
            );
            d.display_name = format!("Mock ({})", lane.as_str());
            d.timeout_ms = 10_000;
            d
        })
        .collect()
}
