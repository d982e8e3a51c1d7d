//! Chat-completions client over HTTP (OpenAI-compatible request shape).

use std::time::Duration;

use lgplan_core::instruction::llm::{ChatMessage, CompletionClient, LlmError};
use serde_json::{json, Value};

pub const KEY_VAR: &str = "LGPLAN_LLM_KEY";

pub struct HttpClient {
    endpoint: String,
    model: String,
    key: String,
    agent: ureq::Agent,
}

impl HttpClient {
    pub fn new(endpoint: &str, model: &str, key: String) -> HttpClient {
        let agent = ureq::Agent::config_builder()
            .timeout_global(Some(Duration::from_secs(60)))
            .http_status_as_error(false)
            .build()
            .into();
        HttpClient {
            endpoint: endpoint.to_string(),
            model: model.to_string(),
            key,
            agent,
        }
    }

    /// Credential from the environment; only called once `--llm` is given.
    pub fn key_from_env() -> Result<String, LlmError> {
        std::env::var(KEY_VAR)
            .ok()
            .filter(|k| !k.is_empty())
            .ok_or_else(|| LlmError::Transport(format!("{KEY_VAR} is not set")))
    }
}

impl CompletionClient for HttpClient {
    fn complete(&mut self, messages: &[ChatMessage]) -> Result<String, LlmError> {
        let body = json!({
            "model": self.model,
            "temperature": 0,
            "messages": messages,
        });
        let mut resp = self
            .agent
            .post(&self.endpoint)
            .header("Authorization", &format!("Bearer {}", self.key))
            .send_json(&body)
            .map_err(|e| LlmError::Transport(e.to_string()))?;
        let status = resp.status();
        let text = resp
            .body_mut()
            .read_to_string()
            .map_err(|e| LlmError::Transport(e.to_string()))?;
        if !status.is_success() {
            return Err(LlmError::Transport(format!("HTTP {status}: {text}")));
        }
        let v: Value = serde_json::from_str(&text)
            .map_err(|e| LlmError::Transport(format!("bad response body: {e}")))?;
        v["choices"][0]["message"]["content"]
            .as_str()
            .map(str::to_string)
            .ok_or_else(|| LlmError::Transport(format!("no message content in {text}")))
    }
}
