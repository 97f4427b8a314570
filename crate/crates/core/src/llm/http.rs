//! Chat-completions over HTTP JSON.
//!
//! `POST {base_url}/chat/completions` with a bearer token. Request body:
//! `model`, `messages` (one `system`, one `user`), `max_completion_tokens`,
//! and `temperature` (omitted for reasoning model families that only accept
//! the default). Response fields read: `choices[0].message.content`,
//! `usage.prompt_tokens`, `usage.completion_tokens`.

use std::time::Duration;

use async_trait::async_trait;
use serde::{Deserialize, Serialize};

use super::{CompletionRequest, Provider, ProviderError, ProviderReply};

pub const API_KEY_ENV: &str = "CIAO_API_KEY";
pub const BASE_URL_ENV: &str = "CIAO_BASE_URL";
pub const DEFAULT_BASE_URL: &str = "https://api.openai.com/v1";

const FIXED_TEMPERATURE_PREFIXES: &[&str] = &["gpt-5", "o1", "o3", "o4"];

pub struct HttpProvider {
    client: reqwest::Client,
    endpoint: String,
    api_key: String,
}

#[derive(Serialize)]
struct ChatMessage<'a> {
    role: &'a str,
    content: &'a str,
}

#[derive(Serialize)]
struct ChatRequest<'a> {
    model: &'a str,
    messages: [ChatMessage<'a>; 2],
    max_completion_tokens: u32,
    #[serde(skip_serializing_if = "Option::is_none")]
    temperature: Option<f32>,
}

#[derive(Deserialize)]
struct ChatResponse {
    #[serde(default)]
    choices: Vec<Choice>,
    usage: Option<Usage>,
}

#[derive(Deserialize)]
struct Choice {
    message: ResponseMessage,
}

#[derive(Deserialize)]
struct ResponseMessage {
    content: Option<String>,
}

#[derive(Deserialize)]
struct Usage {
    prompt_tokens: Option<u64>,
    completion_tokens: Option<u64>,
}

impl HttpProvider {
    pub fn new(base_url: &str, api_key: impl Into<String>, timeout: Duration) -> Result<Self, ProviderError> {
        let client = reqwest::Client::builder()
            .timeout(timeout)
            .build()
            .map_err(|e| ProviderError::Network(e.to_string()))?;
        Ok(Self {
            client,
            endpoint: format!("{}/chat/completions", base_url.trim_end_matches('/')),
            api_key: api_key.into(),
        })
    }

    /// Reads the credential from `CIAO_API_KEY` and the optional endpoint from
    /// `CIAO_BASE_URL`. Returns `None` when no credential is set.
    pub fn from_env(timeout: Duration) -> Option<Result<Self, ProviderError>> {
        let key = std::env::var(API_KEY_ENV).ok().filter(|k| !k.trim().is_empty())?;
        let base = std::env::var(BASE_URL_ENV)
            .ok()
            .filter(|u| !u.trim().is_empty())
            .unwrap_or_else(|| DEFAULT_BASE_URL.to_owned());
        Some(Self::new(&base, key, timeout))
    }

    pub fn endpoint(&self) -> &str {
        &self.endpoint
    }
}

fn accepts_temperature(model_id: &str) -> bool {
    !FIXED_TEMPERATURE_PREFIXES.iter().any(|p| model_id.starts_with(p))
}

fn classify_status(status: u16, body: String) -> ProviderError {
    let message: String = body.chars().take(500).collect();
    match status {
        401 | 403 => ProviderError::Auth(message),
        408 => ProviderError::Timeout,
        429 => ProviderError::RateLimited,
        500..=599 => ProviderError::Server { status, message },
        _ => ProviderError::Rejected { status, message },
    }
}

#[async_trait]
impl Provider for HttpProvider {
    async fn send(&self, req: &CompletionRequest) -> Result<ProviderReply, ProviderError> {
        let body = ChatRequest {
            model: &req.model_id,
            messages: [
                ChatMessage {
                    role: "system",
                    content: &req.system_text,
                },
                ChatMessage {
                    role: "user",
                    content: &req.user_text,
                },
            ],
            max_completion_tokens: req.max_output_tokens,
            temperature: accepts_temperature(&req.model_id).then_some(req.temperature),
        };
        let response = self
            .client
            .post(&self.endpoint)
            .bearer_auth(&self.api_key)
            .json(&body)
            .send()
            .await
            .map_err(|e| {
                if e.is_timeout() {
                    ProviderError::Timeout
                } else {
                    ProviderError::Network(e.to_string())
                }
            })?;
        let status = response.status().as_u16();
        let text = response.text().await.map_err(|e| {
            if e.is_timeout() {
                ProviderError::Timeout
            } else {
                ProviderError::Network(e.to_string())
            }
        })?;
        if !(200..300).contains(&status) {
            return Err(classify_status(status, text));
        }
        let parsed: ChatResponse =
            serde_json::from_str(&text).map_err(|e| ProviderError::InvalidResponse(e.to_string()))?;
        let content = parsed
            .choices
            .into_iter()
            .next()
            .and_then(|c| c.message.content)
            .unwrap_or_default();
        let usage = parsed.usage;
        Ok(ProviderReply {
            text: content,
            input_tokens: usage.as_ref().and_then(|u| u.prompt_tokens),
            output_tokens: usage.as_ref().and_then(|u| u.completion_tokens),
        })
    }
}
