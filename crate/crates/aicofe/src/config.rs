//! Service configuration: one TOML file plus `AICOFE_*` environment overrides.
//!
//! | Variable | Overrides |
//! |---|---|
//! | `AICOFE_BIND` | `server.bind` |
//! | `AICOFE_DATA_DIR` | `storage.data_dir` |
//! | `AICOFE_PROVIDERS` | `generation.providers` (`mock`, `production`, `custom`) |
//! | `AICOFE_MOCK_LATENCY_MS` | `generation.mock_latency_ms` |
//! | `AICOFE_AUTO_GENERATE` | `generation.auto_trigger` |
//! | `AICOFE_RECORD_DIR` | `generation.record_dir` |
//! | `AICOFE_LOG_FORMAT` | `logging.format` (`text`, `json`) |
//! | `AICOFE_LOG_LEVEL` | `logging.level` |
//!
//! Provider credentials are read from the variables named in each
//! descriptor, by default `OPENAI_API_KEY`, `GEMINI_API_KEY` and
//! `LLAMA_API_KEY`.

use std::path::{Path, PathBuf};
use std::str::FromStr;

use aicofe_gateway::ProviderDescriptor;
use serde::{Deserialize, Serialize};

#[derive(Debug, thiserror::Error)]
pub enum ConfigError {
    #[error("cannot read {path}: {source}")]
    Read { path: PathBuf, source: std::io::Error },
    #[error("invalid config: {0}")]
    Parse(#[from] toml::de::Error),
    #[error("invalid value {value:?} for {var}")]
    Env { var: &'static str, value: String },
    #[error("{0}")]
    Invalid(String),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Config {
    pub server: ServerConfig,
    pub storage: StorageConfig,
    pub generation: GenerationConfig,
    pub auth: AuthConfig,
    pub logging: LoggingConfig,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ServerConfig {
    pub bind: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct StorageConfig {
    pub data_dir: PathBuf,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ProviderSet {
    /// Three deterministic offline providers.
    Mock,
    /// GPT-4.1-mini, Gemini 2.5 Flash and Llama 3.1 over HTTP.
    Production,
    /// The descriptors listed under `generation.descriptors`.
    Custom,
}

impl FromStr for ProviderSet {
    type Err = ();

    fn from_str(s: &str) -> Result<Self, ()> {
        match s {
            "mock" => Ok(ProviderSet::Mock),
            "production" => Ok(ProviderSet::Production),
            "custom" => Ok(ProviderSet::Custom),
            _ => Err(()),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GenerationConfig {
    pub providers: ProviderSet,
    pub mock_latency_ms: u64,
    /// Start generation when the last expected evaluation arrives.
    pub auto_trigger: bool,
    /// Evaluations (excluding self) that complete an instance for auto-trigger.
    pub auto_trigger_after: usize,
    /// When set, every provider response is also written as a replay fixture.
    pub record_dir: Option<PathBuf>,
    pub descriptors: Vec<ProviderDescriptor>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TokenEntry {
    pub token: String,
    pub user_id: String,
    #[serde(default)]
    pub expires_at: Option<chrono::DateTime<chrono::Utc>>,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AuthConfig {
    pub tokens: Vec<TokenEntry>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LogFormat {
    Text,
    Json,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LoggingConfig {
    pub format: LogFormat,
    pub level: String,
}

impl Default for ServerConfig {
    fn default() -> Self {
        Self {
            bind: "127.0.0.1:8080".into(),
        }
    }
}

impl Default for StorageConfig {
    fn default() -> Self {
        Self {
            data_dir: PathBuf::from("./aicofe-data"),
        }
    }
}

impl Default for GenerationConfig {
    fn default() -> Self {
        Self {
            providers: ProviderSet::Mock,
            mock_latency_ms: 0,
            auto_trigger: false,
            auto_trigger_after: 3,
            record_dir: None,
            descriptors: Vec::new(),
        }
    }
}

impl Default for LoggingConfig {
    fn default() -> Self {
        Self {
            format: LogFormat::Text,
            level: "info".into(),
        }
    }
}

impl Default for Config {
    fn default() -> Self {
        Self {
            server: ServerConfig::default(),
            storage: StorageConfig::default(),
            generation: GenerationConfig::default(),
            auth: AuthConfig::default(),
            logging: LoggingConfig::default(),
        }
    }
}

impl Config {
    pub fn from_toml(text: &str) -> Result<Self, ConfigError> {
        Ok(toml::from_str(text)?)
    }

    /// Reads `path` if given, then applies environment overrides.
    pub fn load(path: Option<&Path>) -> Result<Self, ConfigError> {
        let mut cfg = match path {
            Some(p) => {
                let text = std::fs::read_to_string(p).map_err(|source| ConfigError::Read {
                    path: p.to_path_buf(),
                    source,
                })?;
                Self::from_toml(&text)?
            }
            None => Self::default(),
        };
        cfg.apply_env(|k| std::env::var(k).ok())?;
        cfg.check()?;
        Ok(cfg)
    }

    pub fn apply_env(&mut self, get: impl Fn(&str) -> Option<String>) -> Result<(), ConfigError> {
        fn parse<T: FromStr>(var: &'static str, value: String) -> Result<T, ConfigError> {
            value.parse().map_err(|_| ConfigError::Env { var, value })
        }
        if let Some(v) = get("AICOFE_BIND") {
            self.server.bind = v;
        }
        if let Some(v) = get("AICOFE_DATA_DIR") {
            self.storage.data_dir = v.into();
        }
        if let Some(v) = get("AICOFE_PROVIDERS") {
            self.generation.providers = parse("AICOFE_PROVIDERS", v)?;
        }
        if let Some(v) = get("AICOFE_MOCK_LATENCY_MS") {
            self.generation.mock_latency_ms = parse("AICOFE_MOCK_LATENCY_MS", v)?;
        }
        if let Some(v) = get("AICOFE_AUTO_GENERATE") {
            self.generation.auto_trigger = parse("AICOFE_AUTO_GENERATE", v)?;
        }
        if let Some(v) = get("AICOFE_RECORD_DIR") {
            self.generation.record_dir = Some(v.into());
        }
        if let Some(v) = get("AICOFE_LOG_FORMAT") {
            self.logging.format = match v.as_str() {
                "text" => LogFormat::Text,
                "json" => LogFormat::Json,
                _ => return Err(ConfigError::Env { var: "AICOFE_LOG_FORMAT", value: v }),
            };
        }
        if let Some(v) = get("AICOFE_LOG_LEVEL") {
            self.logging.level = v;
        }
        Ok(())
    }

    pub fn check(&self) -> Result<(), ConfigError> {
        if self.generation.providers == ProviderSet::Custom && self.generation.descriptors.is_empty() {
            return Err(ConfigError::Invalid("providers = \"custom\" needs at least one descriptor".into()));
        }
        for d in &self.generation.descriptors {
            d.validate().map_err(|e| ConfigError::Invalid(e.to_string()))?;
        }
        Ok(())
    }

    /// Descriptors of the selected provider set.
    pub fn descriptors(&self) -> Vec<ProviderDescriptor> {
        match self.generation.providers {
            ProviderSet::Mock => aicofe_gateway::mock_descriptors(self.generation.mock_latency_ms),
            ProviderSet::Production => aicofe_gateway::default_descriptors(),
            ProviderSet::Custom => self.generation.descriptors.clone(),
        }
    }
}
