//! The AICoFe feedback service.
//!
//! [`Service`] ties the domain core, the provider gateway and the stores
//! together. The [`api`] module exposes it over HTTP; the `aicofe` binary
//! wraps both with configuration and maintenance commands.

pub mod admin;
pub mod api;
pub mod config;
pub mod error;
pub mod fixtures;
pub mod pipeline;
pub mod service;
pub mod workflow;

use std::sync::Arc;

use aicofe_gateway::replay::RecordingProvider;
use aicofe_gateway::{build_provider, Gateway, Provider, ProviderDescriptor};
use aicofe_store::Store;
use anyhow::Context;

pub use config::Config;
pub use error::{AppError, Result};
pub use pipeline::{CandidateSummary, EmailGuard, GenerationReport};
pub use service::{Service, Settings};

/// Builds the gateway for `descriptors`, optionally recording every response.
pub fn build_gateway(descriptors: Vec<ProviderDescriptor>, record_dir: Option<&std::path::Path>) -> anyhow::Result<Gateway> {
    let client = reqwest::Client::builder().build().context("building HTTP client")?;
    let mut providers: Vec<Arc<dyn Provider>> = Vec::with_capacity(descriptors.len());
    for d in descriptors {
        let p = build_provider(d, client.clone())?;
        providers.push(match record_dir {
            Some(dir) => Arc::new(RecordingProvider::new(p, dir)),
            None => p,
        });
    }
    Ok(Gateway::new(providers)?.with_guard(Arc::new(EmailGuard)))
}

impl Settings {
    pub fn from_config(config: &Config) -> Self {
        Self {
            auto_trigger: config.generation.auto_trigger,
            auto_trigger_after: config.generation.auto_trigger_after,
            ..Self::default()
        }
    }
}

impl Service {
    /// Opens the data directory and gateway described by `config`.
    pub fn from_config(config: &Config) -> anyhow::Result<Self> {
        let store = Store::open_dir(&config.storage.data_dir)
            .with_context(|| format!("opening data directory {}", config.storage.data_dir.display()))?;
        let gateway = build_gateway(config.descriptors(), config.generation.record_dir.as_deref())?;
        let svc = Service::new(Arc::new(store), Arc::new(gateway), Settings::from_config(config));
        svc.register_tokens(config)?;
        Ok(svc)
    }

    /// Adds configured tokens whose users exist and that are not yet known.
    pub fn register_tokens(&self, config: &Config) -> anyhow::Result<()> {
        let now = chrono::Utc::now();
        for t in &config.auth.tokens {
            let user = aicofe_core::model::UserId::new(&t.user_id);
            self.store.db.write(|r| {
                if r.user_for_token(&t.token, now)?.is_none() && r.get_user(&user).is_ok() {
                    r.insert_token(&t.token, &user, t.expires_at)?;
                }
                Ok(())
            })?;
        }
        Ok(())
    }

    /// In-memory stores; files go under `files_root`.
    pub fn ephemeral(files_root: impl AsRef<std::path::Path>, gateway: Gateway, settings: Settings) -> anyhow::Result<Self> {
        let store = Store::ephemeral(files_root)?;
        Ok(Service::new(Arc::new(store), Arc::new(gateway), settings))
    }
}

/// Ephemeral service with the three mock providers and the demo fixtures loaded.
pub fn demo_service(files_root: impl AsRef<std::path::Path>, mock_latency_ms: u64, settings: Settings) -> anyhow::Result<Service> {
    let gateway = build_gateway(aicofe_gateway::mock_descriptors(mock_latency_ms), None)?;
    let svc = Service::ephemeral(files_root, gateway, settings)?;
    fixtures::seed_base(&svc)?;
    Ok(svc)
}
