//! OpenAI-compatible `/chat/completions` client.

use std::time::{Duration, Instant};

use base64::Engine;
use serde::{Deserialize, Serialize};

use super::{ChatBackend, ChatRequest, ChatResponse, GatewayError, Part};

const MAX_ATTEMPTS: u32 = 3;
const INITIAL_BACKOFF: Duration = Duration::from_millis(500);
const REQUEST_TIMEOUT: Duration = Duration::from_secs(300);

#[derive(Serialize)]
struct WireRequest<'a> {
    model: &'a str,
    temperature: f64,
    max_tokens: u32,
    messages: Vec<WireMessage<'a>>,
}

#[derive(Serialize)]
struct WireMessage<'a> {
    role: &'static str,
    content: Vec<WirePart<'a>>,
}

#[derive(Serialize)]
#[serde(tag = "type", rename_all = "snake_case")]
enum WirePart<'a> {
    Text { text: &'a str },
    ImageUrl { image_url: WireImageUrl },
}

#[derive(Serialize)]
struct WireImageUrl {
    url: String,
}

#[derive(Deserialize)]
struct WireResponse {
    #[serde(default)]
    choices: Vec<WireChoice>,
    #[serde(default)]
    usage: Option<WireUsage>,
}

#[derive(Deserialize)]
struct WireChoice {
    message: WireChoiceMessage,
}

#[derive(Deserialize)]
struct WireChoiceMessage {
    #[serde(default)]
    content: Option<String>,
}

#[derive(Deserialize, Default)]
struct WireUsage {
    #[serde(default)]
    prompt_tokens: u64,
    #[serde(default)]
    completion_tokens: u64,
}

/// JSON body sent for `request`. Images become base64 data URLs.
pub(crate) fn wire_body(request: &ChatRequest) -> serde_json::Value {
    let messages = request
        .messages
        .iter()
        .map(|m| WireMessage {
            role: m.role.as_str(),
            content: m
                .parts
                .iter()
                .map(|p| match p {
                    Part::Text(text) => WirePart::Text { text },
                    Part::Image { bytes, media_type } => WirePart::ImageUrl {
                        image_url: WireImageUrl {
                            url: format!(
                                "data:{media_type};base64,{}",
                                base64::engine::general_purpose::STANDARD.encode(bytes)
                            ),
                        },
                    },
                })
                .collect(),
        })
        .collect();
    serde_json::to_value(WireRequest {
        model: &request.model,
        temperature: request.temperature,
        max_tokens: request.max_output_tokens,
        messages,
    })
    .expect("wire request is always serializable")
}

/// Live HTTP backend with bounded exponential-backoff retries.
pub struct LiveBackend {
    base_url: String,
    credential_env: String,
    agent: ureq::Agent,
    max_attempts: u32,
    initial_backoff: Duration,
}

impl LiveBackend {
    pub fn new(base_url: impl Into<String>, credential_env: impl Into<String>) -> Self {
        let agent = ureq::Agent::config_builder()
            .timeout_global(Some(REQUEST_TIMEOUT))
            .http_status_as_error(false)
            .build()
            .new_agent();
        Self {
            base_url: base_url.into(),
            credential_env: credential_env.into(),
            agent,
            max_attempts: MAX_ATTEMPTS,
            initial_backoff: INITIAL_BACKOFF,
        }
    }

    pub fn with_initial_backoff(mut self, backoff: Duration) -> Self {
        self.initial_backoff = backoff;
        self
    }

    pub fn endpoint(&self) -> String {
        format!("{}/chat/completions", self.base_url.trim_end_matches('/'))
    }

    fn credential(&self) -> Result<String, GatewayError> {
        match std::env::var(&self.credential_env) {
            Ok(v) if !v.trim().is_empty() => Ok(v),
            _ => Err(GatewayError::Auth(format!(
                "environment variable {} is not set",
                self.credential_env
            ))),
        }
    }

    fn send_once(&self, body: &serde_json::Value, key: &str) -> Result<ChatResponse, GatewayError> {
        let started = Instant::now();
        let mut response = self
            .agent
            .post(self.endpoint())
            .header("Authorization", format!("Bearer {key}"))
            .send_json(body)
            .map_err(|e| GatewayError::Network(e.to_string()))?;
        let status = response.status().as_u16();
        let text = response
            .body_mut()
            .read_to_string()
            .map_err(|e| GatewayError::Network(e.to_string()))?;
        match status {
            200..=299 => {}
            401 | 403 => return Err(GatewayError::Auth(format!("status {status}: {text}"))),
            500..=599 => return Err(GatewayError::Network(format!("status {status}: {text}"))),
            _ => return Err(GatewayError::Rejected { status, body: text }),
        }
        let parsed: WireResponse = serde_json::from_str(&text)
            .map_err(|e| GatewayError::MalformedResponse(e.to_string()))?;
        let choice = parsed
            .choices
            .into_iter()
            .next()
            .ok_or_else(|| GatewayError::MalformedResponse("no choices".into()))?;
        let usage = parsed.usage.unwrap_or_default();
        Ok(ChatResponse {
            text: choice.message.content.unwrap_or_default(),
            prompt_tokens: usage.prompt_tokens,
            completion_tokens: usage.completion_tokens,
            latency: started.elapsed(),
        })
    }
}

impl ChatBackend for LiveBackend {
    fn complete(&self, request: &ChatRequest) -> Result<ChatResponse, GatewayError> {
        let key = self.credential()?;
        let body = wire_body(request);
        let mut backoff = self.initial_backoff;
        let mut attempt = 1;
        loop {
            match self.send_once(&body, &key) {
                Err(e) if e.is_retryable() && attempt < self.max_attempts => {
                    tracing::warn!(attempt, error = %e, "chat request failed, retrying");
                    std::thread::sleep(backoff);
                    backoff *= 2;
                    attempt += 1;
                }
                other => return other,
            }
        }
    }
}
