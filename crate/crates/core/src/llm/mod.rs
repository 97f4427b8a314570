//! Provider-agnostic chat completion with bounded retries and usage capture.

mod cost;
mod http;
mod mock;

use std::sync::Arc;
use std::time::Duration;

use async_trait::async_trait;
use rand::Rng;
use tokio::sync::Semaphore;

use crate::clock::Clock;
use crate::prompt::estimate_tokens;

pub use cost::{
    accumulate_cost, call_cost, format_usd, CallCost, CallUsage, CostError, CostReport, ModelPrice, PriceTable,
};
pub use http::{HttpProvider, API_KEY_ENV, BASE_URL_ENV, DEFAULT_BASE_URL};
pub use mock::{MockFailure, MockProvider, MockScript, MockScriptEntry, MockStep};

pub const DEFAULT_TEMPERATURE: f32 = 0.2;
pub const DEFAULT_MAX_OUTPUT_TOKENS: u32 = 32_000;

#[derive(Debug, Clone, PartialEq)]
pub struct CompletionRequest {
    /// Caller-side tag (the section id); not sent to the provider.
    pub label: String,
    pub model_id: String,
    pub system_text: String,
    pub user_text: String,
    pub max_output_tokens: u32,
    pub temperature: f32,
}

impl CompletionRequest {
    pub fn validate(&self) -> Result<(), LlmError> {
        if self.model_id.trim().is_empty() {
            return Err(LlmError::InvalidRequest("model id is empty".into()));
        }
        if self.max_output_tokens == 0 {
            return Err(LlmError::InvalidRequest("max_output_tokens must be positive".into()));
        }
        if !(0.0..=2.0).contains(&self.temperature) {
            return Err(LlmError::InvalidRequest(format!(
                "temperature {} outside [0, 2]",
                self.temperature
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CompletionResult {
    pub text: String,
    pub input_tokens: u64,
    pub output_tokens: u64,
    pub latency_ms: u64,
    pub attempts: u32,
}

/// What a provider returns for one attempt. Missing usage is estimated.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ProviderReply {
    pub text: String,
    pub input_tokens: Option<u64>,
    pub output_tokens: Option<u64>,
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum ProviderError {
    #[error("request timed out")]
    Timeout,
    #[error("rate limited")]
    RateLimited,
    #[error("server error {status}: {message}")]
    Server { status: u16, message: String },
    #[error("network error: {0}")]
    Network(String),
    #[error("authentication failed: {0}")]
    Auth(String),
    #[error("request rejected ({status}): {message}")]
    Rejected { status: u16, message: String },
    #[error("malformed provider response: {0}")]
    InvalidResponse(String),
}

impl ProviderError {
    pub fn is_transient(&self) -> bool {
        matches!(
            self,
            ProviderError::Timeout
                | ProviderError::RateLimited
                | ProviderError::Server { .. }
                | ProviderError::Network(_)
        )
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum LlmError {
    #[error("authentication failed: {0}")]
    AuthFailed(String),
    #[error("provider failed after {attempts} attempts: {last}")]
    ProviderExhausted { attempts: u32, last: ProviderError },
    #[error("provider returned an empty completion")]
    OutputEmpty,
    #[error("provider rejected the request: {0}")]
    Rejected(ProviderError),
    #[error("invalid completion request: {0}")]
    InvalidRequest(String),
}

#[async_trait]
pub trait Provider: Send + Sync {
    async fn send(&self, req: &CompletionRequest) -> Result<ProviderReply, ProviderError>;
}

/// Exponential backoff with full jitter: the wait before retry `k` (0-based)
/// is uniform in `[0, base * factor^k]`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct RetryPolicy {
    pub max_attempts: u32,
    pub base_delay: Duration,
    pub factor: u32,
}

impl Default for RetryPolicy {
    fn default() -> Self {
        Self {
            max_attempts: 3,
            base_delay: Duration::from_secs(2),
            factor: 4,
        }
    }
}

impl RetryPolicy {
    /// Same attempt bound, no waiting.
    pub fn immediate() -> Self {
        Self {
            base_delay: Duration::ZERO,
            ..Self::default()
        }
    }

    pub fn delay_cap(&self, retry: u32) -> Duration {
        self.base_delay.saturating_mul(self.factor.saturating_pow(retry))
    }

    pub fn delay_for<R: Rng + ?Sized>(&self, retry: u32, rng: &mut R) -> Duration {
        let cap = self.delay_cap(retry).as_millis() as u64;
        if cap == 0 {
            return Duration::ZERO;
        }
        Duration::from_millis(rng.random_range(0..=cap))
    }
}

/// A provider plus retry policy, clock and optional in-flight cap.
#[derive(Clone)]
pub struct Gateway {
    provider: Arc<dyn Provider>,
    policy: RetryPolicy,
    clock: Arc<dyn Clock>,
    limiter: Option<Arc<Semaphore>>,
}

impl Gateway {
    pub fn new(provider: Arc<dyn Provider>, policy: RetryPolicy, clock: Arc<dyn Clock>) -> Self {
        Self {
            provider,
            policy,
            clock,
            limiter: None,
        }
    }

    /// Caps concurrent `complete` calls at `permits`.
    pub fn with_concurrency_limit(mut self, permits: usize) -> Self {
        self.limiter = Some(Arc::new(Semaphore::new(permits.max(1))));
        self
    }

    pub fn policy(&self) -> &RetryPolicy {
        &self.policy
    }

    pub fn clock(&self) -> &Arc<dyn Clock> {
        &self.clock
    }

    /// Sends `req`, retrying transient failures up to the policy's attempt bound.
    pub async fn complete(&self, req: &CompletionRequest) -> Result<CompletionResult, LlmError> {
        req.validate()?;
        let _permit = match &self.limiter {
            Some(sem) => Some(sem.clone().acquire_owned().await.expect("semaphore is never closed")),
            None => None,
        };
        let started = self.clock.ticks_ms();
        let max_attempts = self.policy.max_attempts.max(1);
        let mut attempt = 0;
        loop {
            attempt += 1;
            match self.provider.send(req).await {
                Ok(reply) => {
                    if reply.text.trim().is_empty() {
                        return Err(LlmError::OutputEmpty);
                    }
                    let input_tokens = reply.input_tokens.unwrap_or_else(|| {
                        (estimate_tokens(&req.system_text) + estimate_tokens(&req.user_text)) as u64
                    });
                    let output_tokens = reply
                        .output_tokens
                        .unwrap_or_else(|| estimate_tokens(&reply.text) as u64);
                    return Ok(CompletionResult {
                        text: reply.text,
                        input_tokens,
                        output_tokens,
                        latency_ms: self.clock.ticks_ms().saturating_sub(started),
                        attempts: attempt,
                    });
                }
                Err(ProviderError::Auth(msg)) => return Err(LlmError::AuthFailed(msg)),
                Err(err) if !err.is_transient() => return Err(LlmError::Rejected(err)),
                Err(err) => {
                    if attempt >= max_attempts {
                        return Err(LlmError::ProviderExhausted {
                            attempts: attempt,
                            last: err,
                        });
                    }
                    let delay = self.policy.delay_for(attempt - 1, &mut rand::rng());
                    tracing::warn!(label = %req.label, attempt, error = %err, delay_ms = delay.as_millis() as u64, "transient provider failure, retrying");
                    if !delay.is_zero() {
                        tokio::time::sleep(delay).await;
                    }
                }
            }
        }
    }
}
