use std::collections::VecDeque;
use std::sync::Mutex;
use std::time::Duration;

use super::{ChatBackend, ChatRequest, ChatResponse, GatewayError};

/// Answers requests from a fixed queue of responses, in order, and keeps
/// every request it saw. Intended for tests and fixture recording.
#[derive(Debug, Default)]
pub struct ScriptedBackend {
    queue: Mutex<VecDeque<String>>,
    seen: Mutex<Vec<ChatRequest>>,
}

impl ScriptedBackend {
    pub fn new<I, S>(responses: I) -> Self
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        Self {
            queue: Mutex::new(responses.into_iter().map(Into::into).collect()),
            seen: Mutex::new(Vec::new()),
        }
    }

    pub fn push(&self, response: impl Into<String>) {
        self.queue.lock().unwrap().push_back(response.into());
    }

    pub fn calls(&self) -> usize {
        self.seen.lock().unwrap().len()
    }

    pub fn remaining(&self) -> usize {
        self.queue.lock().unwrap().len()
    }

    pub fn requests(&self) -> Vec<ChatRequest> {
        self.seen.lock().unwrap().clone()
    }
}

impl ChatBackend for ScriptedBackend {
    fn complete(&self, request: &ChatRequest) -> Result<ChatResponse, GatewayError> {
        self.seen.lock().unwrap().push(request.clone());
        let text = self
            .queue
            .lock()
            .unwrap()
            .pop_front()
            .ok_or(GatewayError::ScriptExhausted)?;
        Ok(ChatResponse {
            prompt_tokens: word_count(&request.prompt_text()),
            completion_tokens: word_count(&text),
            text,
            latency: Duration::ZERO,
        })
    }
}

fn word_count(text: &str) -> u64 {
    text.split_whitespace().count() as u64
}
