use std::time::{Duration, Instant};

use aicofe_core::model::InstanceId;
use rand::Rng;
use tokio::sync::Mutex;

use crate::descriptor::RateLimit;
use crate::error::ProviderError;
use crate::provider::{prompt_digest, GenerationResult, Outcome, Provider};

/// Token bucket shared by all calls to one provider.
#[derive(Debug)]
pub struct RateLimiter {
    limit: RateLimit,
    state: Mutex<(f64, Instant)>,
}

impl RateLimiter {
    pub fn new(limit: RateLimit) -> Self {
        Self {
            limit,
            state: Mutex::new((f64::from(limit.burst), Instant::now())),
        }
    }

    /// Waits until a token is available and takes it.
    pub async fn acquire(&self) {
        let mut state = self.state.lock().await;
        loop {
            let now = Instant::now();
            let (tokens, last) = *state;
            let refilled =
                (tokens + now.duration_since(last).as_secs_f64() * self.limit.per_second).min(f64::from(self.limit.burst));
            if refilled >= 1.0 {
                *state = (refilled - 1.0, now);
                return;
            }
            *state = (refilled, now);
            let wait = (1.0 - refilled) / self.limit.per_second;
            tokio::time::sleep(Duration::from_secs_f64(wait)).await;
        }
    }
}

/// Calls one provider with per-attempt timeout, exponential backoff and
/// full jitter. The first successful attempt wins.
pub async fn provider_call(
    provider: &dyn Provider,
    instance_id: &InstanceId,
    prompt: &str,
    limiter: Option<&RateLimiter>,
) -> GenerationResult {
    let d = provider.descriptor();
    let started = Instant::now();
    let mut attempt = 0;
    let mut last_err = ProviderError::Other("no attempt made".into());
    while attempt < d.max_attempts {
        attempt += 1;
        if let Some(l) = limiter {
            l.acquire().await;
        }
        let res = match tokio::time::timeout(d.timeout(), provider.complete(prompt)).await {
            Ok(r) => r,
            Err(_) => Err(ProviderError::Timeout(d.timeout_ms)),
        };
        match res {
            Ok(text) if !text.trim().is_empty() => {
                return GenerationResult {
                    provider_id: d.id.clone(),
                    lane: d.lane,
                    instance_id: instance_id.clone(),
                    prompt_digest: prompt_digest(prompt),
                    raw_text: text,
                    latency_ms: started.elapsed().as_millis() as u64,
                    attempt,
                    outcome: Outcome::Ok,
                    error: None,
                };
            }
            Ok(_) => last_err = ProviderError::Malformed("empty completion".into()),
            Err(e) => last_err = e,
        }
        tracing::warn!(provider = %d.id, attempt, error = %last_err, "provider attempt failed");
        if !last_err.is_retryable() || attempt == d.max_attempts {
            break;
        }
        let ceiling = d.backoff.ceiling(attempt).as_millis() as u64;
        let pause = rand::thread_rng().gen_range(0..=ceiling);
        tokio::time::sleep(Duration::from_millis(pause)).await;
    }
    GenerationResult {
        provider_id: d.id.clone(),
        lane: d.lane,
        instance_id: instance_id.clone(),
        prompt_digest: prompt_digest(prompt),
        raw_text: String::new(),
        latency_ms: started.elapsed().as_millis() as u64,
        attempt,
        outcome: if matches!(last_err, ProviderError::Timeout(_)) {
            Outcome::Timeout
        } else {
            Outcome::ProviderError
        },
        error: Some(last_err.to_string()),
    }
}
