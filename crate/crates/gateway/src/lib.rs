//! Provider abstraction, concurrent fan-out and the regeneration loop.
//!
//! Every provider receives the same anonymized prompt. [`Gateway::generate_all`]
//! issues the calls concurrently and returns one [`GenerationResult`] per
//! provider, in input order. [`Gateway::generate_validated`] adds the
//! validate-and-regenerate loop on top.

pub mod adapters;
mod descriptor;
mod error;
mod fanout;
pub mod mock;
mod provider;
pub mod replay;
mod retry;

pub use descriptor::{
    default_descriptors, mock_descriptors, Backoff, Endpoint, ProviderDescriptor, RateLimit,
};
pub use error::{GatewayError, ProviderError};
pub use fanout::{Gateway, OutboundGuard, ValidatedCandidate};
pub use provider::{prompt_digest, GenerationResult, Outcome, Provider};
pub use retry::{provider_call, RateLimiter};
pub use adapters::build_provider;
