use std::collections::BTreeSet;
use std::sync::Arc;

use aicofe_core::preprocess::RedactionMap;
use aicofe_core::prompt::PromptBundle;
use aicofe_core::text::word_count;
use aicofe_core::validation::{validate, ValidationPolicy, ValidationVerdict};
use futures::future::join_all;
use serde::{Deserialize, Serialize};

use crate::descriptor::ProviderDescriptor;
use crate::error::GatewayError;
use crate::provider::{GenerationResult, Provider};
use crate::retry::{provider_call, RateLimiter};

/// Last check on every prompt before it leaves the process.
pub trait OutboundGuard: Send + Sync {
    /// Returns a description of the offending content, if any.
    fn check(&self, prompt: &str) -> Result<(), String>;
}

/// Outcome of the validate-and-regenerate loop for one provider.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ValidatedCandidate {
    /// The chosen output: the first passing one, otherwise the best failed one.
    pub result: GenerationResult,
    /// Absent when the provider never returned text.
    pub verdict: Option<ValidationVerdict>,
    pub regenerations: u32,
    /// Generation requests issued, each possibly retried internally.
    pub provider_calls: u32,
}

impl ValidatedCandidate {
    pub fn passed(&self) -> bool {
        self.verdict.as_ref().is_some_and(|v| v.passed)
    }
}

struct Slot {
    provider: Arc<dyn Provider>,
    limiter: Option<RateLimiter>,
}

/// The configured providers plus the outbound guard.
pub struct Gateway {
    slots: Vec<Slot>,
    guard: Option<Arc<dyn OutboundGuard>>,
}

impl Gateway {
    pub fn new(providers: Vec<Arc<dyn Provider>>) -> Result<Self, GatewayError> {
        if providers.is_empty() {
            return Err(GatewayError::NoProviders);
        }
        let mut ids = BTreeSet::new();
        let mut slots = Vec::with_capacity(providers.len());
        for p in providers {
            let d = p.descriptor();
            d.validate()?;
            if !ids.insert(d.id.clone()) {
                return Err(GatewayError::Config(format!("duplicate provider id {}", d.id)));
            }
            slots.push(Slot {
                limiter: d.rate_limit.map(RateLimiter::new),
                provider: p,
            });
        }
        Ok(Self { slots, guard: None })
    }

    pub fn with_guard(mut self, guard: Arc<dyn OutboundGuard>) -> Self {
        self.guard = Some(guard);
        self
    }

    pub fn descriptors(&self) -> impl Iterator<Item = &ProviderDescriptor> {
        self.slots.iter().map(|s| s.provider.descriptor())
    }

    fn check_outbound(&self, prompt: &str) -> Result<(), GatewayError> {
        match &self.guard {
            Some(g) => g.check(prompt).map_err(GatewayError::Guard),
            None => Ok(()),
        }
    }

    /// One result per provider in configuration order. Partial success is
    /// success; only a batch with no ok result is an error.
    pub async fn generate_all(&self, bundle: &PromptBundle) -> Result<Vec<GenerationResult>, GatewayError> {
        self.check_outbound(&bundle.rendered_text)?;
        let results = join_all(self.slots.iter().map(|s| {
            provider_call(s.provider.as_ref(), &bundle.instance_id, &bundle.rendered_text, s.limiter.as_ref())
        }))
        .await;
        if results.iter().any(GenerationResult::is_ok) {
            Ok(results)
        } else {
            Err(GatewayError::NoCandidates(results))
        }
    }

    /// Generates, validates and regenerates per provider, concurrently.
    ///
    /// Each loop re-sends the identical prompt at most `max_regenerations`
    /// times. On exhaustion the failed output with the fewest violations is
    /// kept, ties going to the word count closest to the policy midpoint and
    /// then to the earliest output.
    pub async fn generate_validated(
        &self,
        bundle: &PromptBundle,
        policy: &ValidationPolicy,
        map: Option<&RedactionMap>,
    ) -> Result<Vec<ValidatedCandidate>, GatewayError> {
        self.check_outbound(&bundle.rendered_text)?;
        let outcomes = join_all(self.slots.iter().map(|s| regenerate(s, bundle, policy, map))).await;
        if outcomes.iter().any(|o| o.result.is_ok()) {
            Ok(outcomes)
        } else {
            Err(GatewayError::NoCandidates(outcomes.into_iter().map(|o| o.result).collect()))
        }
    }
}

fn distance_to_midpoint(text: &str, policy: &ValidationPolicy) -> usize {
    let mid2 = policy.min_words + policy.max_words;
    (2 * word_count(text)).abs_diff(mid2)
}

async fn regenerate(
    slot: &Slot,
    bundle: &PromptBundle,
    policy: &ValidationPolicy,
    map: Option<&RedactionMap>,
) -> ValidatedCandidate {
    let mut best: Option<(GenerationResult, ValidationVerdict, u32)> = None;
    let mut calls = 0;
    let mut last_failure = None;
    for round in 0..=policy.max_regenerations {
        calls += 1;
        let result = provider_call(
            slot.provider.as_ref(),
            &bundle.instance_id,
            &bundle.rendered_text,
            slot.limiter.as_ref(),
        )
        .await;
        if !result.is_ok() {
            last_failure = Some(result);
            break;
        }
        let verdict = validate(&result.raw_text, policy, map);
        if verdict.passed {
            return ValidatedCandidate {
                result,
                verdict: Some(verdict),
                regenerations: round,
                provider_calls: calls,
            };
        }
        let better = match &best {
            None => true,
            Some((b, bv, _)) => {
                (verdict.violations.len(), distance_to_midpoint(&result.raw_text, policy))
                    < (bv.violations.len(), distance_to_midpoint(&b.raw_text, policy))
            }
        };
        if better {
            best = Some((result, verdict, round));
        }
    }
    match (best, last_failure) {
        (Some((result, verdict, _)), _) => ValidatedCandidate {
            result,
            verdict: Some(verdict),
            regenerations: calls - 1,
            provider_calls: calls,
        },
        (None, Some(result)) => ValidatedCandidate {
            result,
            verdict: None,
            regenerations: calls - 1,
            provider_calls: calls,
        },
        (None, None) => unreachable!("the loop runs at least once"),
    }
}
