//! Chat-completion gateway shared by every agent.
//!
//! Agents talk to models through [`ChatBackend`]. Three backends cover the
//! deployment modes: a live OpenAI-compatible HTTP client, a hermetic replay
//! backend reading cassettes from disk, and a recorder that serves cassette
//! hits and persists misses. [`chat_complete`] is the single entry point and
//! enforces request validation and the empty-completion rule for all of them.

mod cassette;
mod http;
mod scripted;

use std::path::PathBuf;
use std::sync::atomic::{AtomicU64, Ordering};
use std::time::Duration;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

pub use cassette::{CassetteEntry, CassetteStore, Recorder, ReplayBackend};
pub use http::LiveBackend;
pub use scripted::ScriptedBackend;

pub const DEFAULT_CREDENTIAL_ENV: &str = "PLOTGEN_API_KEY";
pub const DEFAULT_MAX_OUTPUT_TOKENS: u32 = 4096;
pub const PNG_MEDIA_TYPE: &str = "image/png";

const FIELD_SEPARATOR: u8 = 0x1F;

#[derive(Debug, Error)]
pub enum GatewayError {
    #[error("network error: {0}")]
    Network(String),
    #[error("authentication failed: {0}")]
    Auth(String),
    #[error("provider rejected request with status {status}: {body}")]
    Rejected { status: u16, body: String },
    #[error("malformed provider response: {0}")]
    MalformedResponse(String),
    #[error("no cassette for replay key {0}")]
    CassetteMiss(String),
    #[error("cassette store error: {0}")]
    Cassette(String),
    #[error("model returned an empty completion")]
    EmptyCompletion,
    #[error("invalid chat request: {0}")]
    InvalidRequest(String),
    #[error("scripted backend has no response left")]
    ScriptExhausted,
}

impl GatewayError {
    /// Only transport failures and 5xx responses are worth another attempt.
    pub fn is_retryable(&self) -> bool {
        matches!(self, GatewayError::Network(_))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Role {
    System,
    User,
    Assistant,
}

impl Role {
    pub fn as_str(self) -> &'static str {
        match self {
            Role::System => "system",
            Role::User => "user",
            Role::Assistant => "assistant",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Part {
    Text(String),
    Image { bytes: Vec<u8>, media_type: String },
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ChatMessage {
    pub role: Role,
    pub parts: Vec<Part>,
}

impl ChatMessage {
    pub fn text(role: Role, text: impl Into<String>) -> Self {
        Self {
            role,
            parts: vec![Part::Text(text.into())],
        }
    }

    pub fn system(text: impl Into<String>) -> Self {
        Self::text(Role::System, text)
    }

    pub fn user(text: impl Into<String>) -> Self {
        Self::text(Role::User, text)
    }

    pub fn assistant(text: impl Into<String>) -> Self {
        Self::text(Role::Assistant, text)
    }

    /// Appends an inline PNG part.
    pub fn with_png(mut self, bytes: Vec<u8>) -> Self {
        self.parts.push(Part::Image {
            bytes,
            media_type: PNG_MEDIA_TYPE.to_string(),
        });
        self
    }

    /// Concatenation of the text parts.
    pub fn joined_text(&self) -> String {
        self.parts
            .iter()
            .filter_map(|p| match p {
                Part::Text(t) => Some(t.as_str()),
                Part::Image { .. } => None,
            })
            .collect::<Vec<_>>()
            .join("\n")
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ChatRequest {
    pub model: String,
    pub messages: Vec<ChatMessage>,
    pub temperature: f64,
    pub max_output_tokens: u32,
}

impl ChatRequest {
    /// Deterministic decoding: temperature 0.
    pub fn new(settings: &ModelSettings, messages: Vec<ChatMessage>) -> Self {
        Self {
            model: settings.model.clone(),
            messages,
            temperature: 0.0,
            max_output_tokens: settings.max_output_tokens,
        }
    }

    pub fn validate(&self) -> Result<(), GatewayError> {
        if self.model.trim().is_empty() {
            return Err(GatewayError::InvalidRequest("empty model id".into()));
        }
        if self.messages.is_empty() {
            return Err(GatewayError::InvalidRequest("no messages".into()));
        }
        if !(self.temperature >= 0.0 && self.temperature.is_finite()) {
            return Err(GatewayError::InvalidRequest(format!(
                "temperature {} must be finite and >= 0",
                self.temperature
            )));
        }
        for (i, m) in self.messages.iter().enumerate() {
            if m.parts.is_empty() {
                return Err(GatewayError::InvalidRequest(format!(
                    "message {i} has no parts"
                )));
            }
            for p in &m.parts {
                if let Part::Image { media_type, .. } = p {
                    if media_type != PNG_MEDIA_TYPE {
                        return Err(GatewayError::InvalidRequest(format!(
                            "unsupported image media type {media_type}"
                        )));
                    }
                }
            }
        }
        Ok(())
    }

    /// All text parts of all messages, newline separated.
    pub fn prompt_text(&self) -> String {
        self.messages
            .iter()
            .map(ChatMessage::joined_text)
            .collect::<Vec<_>>()
            .join("\n")
    }

    pub fn image_count(&self) -> usize {
        self.messages
            .iter()
            .flat_map(|m| &m.parts)
            .filter(|p| matches!(p, Part::Image { .. }))
            .count()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ChatResponse {
    pub text: String,
    pub prompt_tokens: u64,
    pub completion_tokens: u64,
    pub latency: Duration,
}

/// Model id and output budget for one agent role.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ModelSettings {
    pub model: String,
    pub max_output_tokens: u32,
}

impl ModelSettings {
    pub fn new(model: impl Into<String>) -> Self {
        Self {
            model: model.into(),
            max_output_tokens: DEFAULT_MAX_OUTPUT_TOKENS,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "lowercase")]
pub enum BackendKind {
    Live {
        base_url: String,
        credential_env: String,
    },
    Replay {
        cassette_dir: PathBuf,
    },
    Record {
        base_url: String,
        credential_env: String,
        cassette_dir: PathBuf,
    },
}

impl BackendKind {
    /// Builds the backend. Replay never constructs an HTTP client.
    pub fn connect(&self) -> Box<dyn ChatBackend> {
        match self {
            BackendKind::Live {
                base_url,
                credential_env,
            } => Box::new(LiveBackend::new(base_url.clone(), credential_env.clone())),
            BackendKind::Replay { cassette_dir } => {
                Box::new(ReplayBackend::new(CassetteStore::new(cassette_dir.clone())))
            }
            BackendKind::Record {
                base_url,
                credential_env,
                cassette_dir,
            } => Box::new(Recorder::new(
                LiveBackend::new(base_url.clone(), credential_env.clone()),
                CassetteStore::new(cassette_dir.clone()),
            )),
        }
    }
}

/// Anything that can answer a chat request. Implementations must be safe to
/// share across concurrent sessions.
pub trait ChatBackend: Send + Sync {
    fn complete(&self, request: &ChatRequest) -> Result<ChatResponse, GatewayError>;
}

impl<B: ChatBackend + ?Sized> ChatBackend for &B {
    fn complete(&self, request: &ChatRequest) -> Result<ChatResponse, GatewayError> {
        (**self).complete(request)
    }
}

impl<B: ChatBackend + ?Sized> ChatBackend for Box<B> {
    fn complete(&self, request: &ChatRequest) -> Result<ChatResponse, GatewayError> {
        (**self).complete(request)
    }
}

impl<B: ChatBackend + ?Sized> ChatBackend for std::sync::Arc<B> {
    fn complete(&self, request: &ChatRequest) -> Result<ChatResponse, GatewayError> {
        (**self).complete(request)
    }
}

/// Validates the request, dispatches it, and rejects empty completions.
pub fn chat_complete(
    backend: &dyn ChatBackend,
    request: &ChatRequest,
) -> Result<ChatResponse, GatewayError> {
    request.validate()?;
    let response = backend.complete(request)?;
    if response.text.is_empty() {
        return Err(GatewayError::EmptyCompletion);
    }
    Ok(response)
}

/// Lowercase hex SHA-256 over model id, temperature, and each message's role
/// and parts, separated by 0x1F. Image parts contribute their own SHA-256 hex.
pub fn replay_key(request: &ChatRequest) -> String {
    let mut fields: Vec<Vec<u8>> = vec![
        request.model.as_bytes().to_vec(),
        request.temperature.to_string().into_bytes(),
    ];
    for message in &request.messages {
        fields.push(message.role.as_str().as_bytes().to_vec());
        for part in &message.parts {
            match part {
                Part::Text(t) => fields.push(t.as_bytes().to_vec()),
                Part::Image { bytes, .. } => fields.push(sha256_hex(bytes).into_bytes()),
            }
        }
    }
    let canonical = fields.join(&FIELD_SEPARATOR);
    sha256_hex(&canonical)
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

/// Counts calls and tokens flowing through an inner backend.
pub struct Metered<B> {
    inner: B,
    calls: AtomicU64,
    prompt_tokens: AtomicU64,
    completion_tokens: AtomicU64,
}

impl<B: ChatBackend> Metered<B> {
    pub fn new(inner: B) -> Self {
        Self {
            inner,
            calls: AtomicU64::new(0),
            prompt_tokens: AtomicU64::new(0),
            completion_tokens: AtomicU64::new(0),
        }
    }

    pub fn calls(&self) -> u64 {
        self.calls.load(Ordering::Relaxed)
    }

    pub fn prompt_tokens(&self) -> u64 {
        self.prompt_tokens.load(Ordering::Relaxed)
    }

    pub fn completion_tokens(&self) -> u64 {
        self.completion_tokens.load(Ordering::Relaxed)
    }
}

impl<B: ChatBackend> ChatBackend for Metered<B> {
    fn complete(&self, request: &ChatRequest) -> Result<ChatResponse, GatewayError> {
        self.calls.fetch_add(1, Ordering::Relaxed);
        let response = self.inner.complete(request)?;
        self.prompt_tokens
            .fetch_add(response.prompt_tokens, Ordering::Relaxed);
        self.completion_tokens
            .fetch_add(response.completion_tokens, Ordering::Relaxed);
        Ok(response)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn planner_request(user_text: &str) -> ChatRequest {
        ChatRequest::new(
            &ModelSettings::new("gpt-4"),
            vec![
                ChatMessage::system("You are a planner."),
                ChatMessage::user(user_text),
            ],
        )
    }

    fn image_request(bytes: &[u8]) -> ChatRequest {
        ChatRequest::new(
            &ModelSettings::new("gpt-4v"),
            vec![ChatMessage::user("rate this").with_png(bytes.to_vec())],
        )
    }

    // Expected digests computed independently with Python's hashlib over the
    // same 0x1F-joined field sequence.
    #[test]
    fn replay_key_matches_reference_digests() {
        assert_eq!(
            replay_key(&planner_request("plot sales")),
            "fd88c1af411e78c3d17bd5caa36b5d82711429a3338dba09509614034867aaef"
        );
        assert_eq!(
            replay_key(&planner_request("plot salez")),
            "0644a91aa67dbfe99ea9531bd89cb8225a000a8ca2dc3b35e2719fc3e51b80e3"
        );
        assert_eq!(
            replay_key(&image_request(b"\x89PNG-fake-1")),
            "9e5ed37e189a3258b3f4603263655a714c71fe9159d30aa37d7d12c00bde6901"
        );
        assert_eq!(
            replay_key(&image_request(b"\x89PNG-fake-2")),
            "63b1b70ad2ee33f85b93f956ff575316943087f2f029258549dd73fa8b1c2703"
        );
    }

    #[test]
    fn replay_key_is_deterministic_and_ignores_token_budget() {
        let a = planner_request("plot sales");
        let mut b = a.clone();
        b.max_output_tokens = 16;
        assert_eq!(replay_key(&a), replay_key(&b));
    }

    #[test]
    fn validation_rejects_bad_requests() {
        let mut r = planner_request("x");
        r.temperature = -0.5;
        assert!(matches!(r.validate(), Err(GatewayError::InvalidRequest(_))));
        let mut r = planner_request("x");
        r.messages.clear();
        assert!(r.validate().is_err());
        let mut r = planner_request("x");
        r.messages[0].parts.clear();
        assert!(r.validate().is_err());
        let mut r = image_request(b"x");
        if let Part::Image { media_type, .. } = &mut r.messages[0].parts[1] {
            *media_type = "image/jpeg".into();
        }
        assert!(r.validate().is_err());
    }

    #[test]
    fn empty_completion_is_an_error() {
        let backend = ScriptedBackend::new([""]);
        let err = chat_complete(&backend, &planner_request("x")).unwrap_err();
        assert!(matches!(err, GatewayError::EmptyCompletion));
    }

    #[test]
    fn metered_counts_calls_and_tokens() {
        let backend = Metered::new(ScriptedBackend::new(["one two", "three"]));
        chat_complete(&backend, &planner_request("a b c")).unwrap();
        chat_complete(&backend, &planner_request("a")).unwrap();
        assert_eq!(backend.calls(), 2);
        assert_eq!(backend.completion_tokens(), 3);
        assert!(backend.prompt_tokens() > 0);
    }
}
