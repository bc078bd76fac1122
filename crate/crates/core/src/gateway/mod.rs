//! Completion gateways: the HTTP client for an OpenAI-compatible endpoint
//! and a scripted mock for offline runs.
//!
//! Both implement [`Gateway`]. Sampling-parameter bounds are checked before
//! any request; past that point a gateway never raises — transport and
//! protocol failures come back as a response with `finish_reason: Error`
//! and the campaign treats them as failed snippets.

pub mod http;
pub mod mock;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::prompt::RenderedPrompt;
pub use http::{HttpGateway, HttpGatewayConfig, PenaltyMode};
pub use mock::MockGateway;

pub const ENV_ENDPOINT: &str = "SLT_LLM_ENDPOINT";
pub const ENV_API_KEY: &str = "SLT_LLM_API_KEY";
pub const ENV_MODEL: &str = "SLT_LLM_MODEL";

#[derive(Debug, Error)]
pub enum GatewayError {
    #[error("invalid sampling params: {0}")]
    InvalidParams(String),
    #[error("gateway misconfigured: {0}")]
    Misconfigured(String),
}

/// Sampling knobs for one completion request. Bounds double as the search
/// box for the hyperparameter optimizer.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SamplingParams {
    pub temperature: f64,
    pub repetition_penalty: f64,
    pub max_new_tokens: u32,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub seed: Option<u64>,
}

pub const TEMPERATURE_RANGE: (f64, f64) = (0.0, 2.0);
pub const REPETITION_PENALTY_RANGE: (f64, f64) = (1.0, 2.0);
pub const DEFAULT_MAX_NEW_TOKENS: u32 = 1024;

impl Default for SamplingParams {
    fn default() -> Self {
        Self {
            temperature: 0.8,
            repetition_penalty: 1.1,
            max_new_tokens: DEFAULT_MAX_NEW_TOKENS,
            seed: None,
        }
    }
}

impl SamplingParams {
    pub fn validate(&self) -> Result<(), GatewayError> {
        let (t_lo, t_hi) = TEMPERATURE_RANGE;
        if !(self.temperature >= t_lo && self.temperature <= t_hi) {
            return Err(GatewayError::InvalidParams(format!(
                "temperature {} outside [{t_lo}, {t_hi}]",
                self.temperature
            )));
        }
        let (r_lo, r_hi) = REPETITION_PENALTY_RANGE;
        if !(self.repetition_penalty >= r_lo && self.repetition_penalty <= r_hi) {
            return Err(GatewayError::InvalidParams(format!(
                "repetition_penalty {} outside [{r_lo}, {r_hi}]",
                self.repetition_penalty
            )));
        }
        if self.max_new_tokens < 1 {
            return Err(GatewayError::InvalidParams(
                "max_new_tokens must be at least 1".to_string(),
            ));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FinishReason {
    /// The model stopped on its own.
    Stop,
    /// The token budget ran out; the snippet is likely truncated.
    Length,
    /// Transport or protocol failure; treated as a failed snippet.
    Error,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CompletionResponse {
    pub text: String,
    pub finish_reason: FinishReason,
    pub latency_ms: f64,
    /// Failure detail when `finish_reason` is `Error`.
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub diagnostic: Option<String>,
}

impl CompletionResponse {
    pub fn stopped(text: impl Into<String>) -> Self {
        Self {
            text: text.into(),
            finish_reason: FinishReason::Stop,
            latency_ms: 0.0,
            diagnostic: None,
        }
    }

    pub fn truncated(text: impl Into<String>) -> Self {
        Self {
            text: text.into(),
            finish_reason: FinishReason::Length,
            latency_ms: 0.0,
            diagnostic: None,
        }
    }

    pub fn error(diagnostic: impl Into<String>) -> Self {
        Self {
            text: String::new(),
            finish_reason: FinishReason::Error,
            latency_ms: 0.0,
            diagnostic: Some(diagnostic.into()),
        }
    }
}

/// A completion strategy, shareable across worker threads.
pub trait Gateway: Send + Sync {
    /// Registry name (`http`, `mock`).
    fn name(&self) -> &'static str;
    /// Issue one completion request. `Err` only for precondition
    /// violations (bad sampling params, unusable configuration); all
    /// runtime failures map to a `FinishReason::Error` response.
    fn complete(
        &self,
        prompt: &RenderedPrompt,
        params: &SamplingParams,
    ) -> Result<CompletionResponse, GatewayError>;
}
