//! OpenAI-compatible `/chat/completions` client over blocking HTTP.

use std::io::{BufRead, BufReader};
use std::sync::Arc;
use std::time::Duration;

use serde::Deserialize;
use serde_json::json;

use super::{ChatModel, ChatRequest, LlmConfig, LlmError, ModelInfo};

pub const ENV_ENDPOINT: &str = "STRUCTIND_ENDPOINT";
pub const ENV_API_KEY: &str = "STRUCTIND_API_KEY";
pub const ENV_MODEL: &str = "STRUCTIND_MODEL";

type DeltaSink = Arc<dyn Fn(&str) + Send + Sync>;

pub struct OpenAiClient {
    config: LlmConfig,
    api_key: Option<String>,
    agent: ureq::Agent,
    backoff: Duration,
    on_delta: Option<DeltaSink>,
}

#[derive(Deserialize)]
struct Completion {
    choices: Vec<Choice>,
}

#[derive(Deserialize)]
struct Choice {
    message: ChoiceMessage,
}

#[derive(Deserialize)]
struct ChoiceMessage {
    #[serde(default)]
    content: Option<String>,
}

#[derive(Deserialize)]
struct StreamChunk {
    choices: Vec<StreamChoice>,
}

#[derive(Deserialize)]
struct StreamChoice {
    #[serde(default)]
    delta: StreamDelta,
}

#[derive(Deserialize, Default)]
struct StreamDelta {
    #[serde(default)]
    content: Option<String>,
}

enum Failure {
    Retryable(String),
    Fatal(LlmError),
}

fn is_oversize(body: &str) -> bool {
    body.contains("context_length_exceeded") || body.contains("maximum context length")
}

impl OpenAiClient {
    pub fn new(config: LlmConfig, api_key: Option<String>) -> Result<Self, LlmError> {
        config.validate()?;
        let agent: ureq::Agent = ureq::Agent::config_builder()
            .http_status_as_error(false)
            .timeout_global(Some(Duration::from_secs(config.timeout_secs.max(1))))
            .build()
            .into();
        Ok(Self {
            config,
            api_key: api_key.filter(|k| !k.is_empty()),
            agent,
            backoff: Duration::from_millis(500),
            on_delta: None,
        })
    }

    /// Builds the client from the environment, overriding `base` with
    /// whichever of endpoint, key and model are set. A key is required.
    pub fn from_env(base: LlmConfig) -> Result<Self, LlmError> {
        let mut config = base;
        if let Ok(e) = std::env::var(ENV_ENDPOINT) {
            config.endpoint = e;
        }
        if let Ok(m) = std::env::var(ENV_MODEL) {
            config.model = m;
        }
        let key = std::env::var(ENV_API_KEY)
            .ok()
            .filter(|k| !k.is_empty())
            .ok_or_else(|| LlmError::Config(format!("{ENV_API_KEY} is not set")))?;
        Self::new(config, Some(key))
    }

    pub fn with_backoff(mut self, backoff: Duration) -> Self {
        self.backoff = backoff;
        self
    }

    /// Receives content deltas while a streamed completion arrives.
    pub fn on_delta(mut self, sink: impl Fn(&str) + Send + Sync + 'static) -> Self {
        self.on_delta = Some(Arc::new(sink));
        self
    }

    pub fn config(&self) -> &LlmConfig {
        &self.config
    }

    fn redact(&self, text: &str) -> String {
        match &self.api_key {
            Some(k) => text.replace(k.as_str(), "[redacted]"),
            None => text.to_string(),
        }
    }

    fn url(&self) -> String {
        format!("{}/chat/completions", self.config.endpoint.trim_end_matches('/'))
    }

    fn attempt(&self, request: &ChatRequest) -> Result<String, Failure> {
        let body = json!({
            "model": self.config.model,
            "temperature": self.config.temperature,
            "messages": request.messages,
            "stream": self.config.stream,
        });
        let mut builder = self.agent.post(&self.url());
        if let Some(k) = &self.api_key {
            builder = builder.header("Authorization", format!("Bearer {k}"));
        }
        let mut response = builder
            .send_json(&body)
            .map_err(|e| Failure::Retryable(e.to_string()))?;
        let status = response.status().as_u16();
        if !(200..300).contains(&status) {
            let text = response.body_mut().read_to_string().unwrap_or_default();
            if is_oversize(&text) {
                return Err(Failure::Fatal(LlmError::Oversize(text)));
            }
            let message = format!("HTTP {status}: {text}");
            return Err(if status == 408 || status == 409 || status == 429 || status >= 500 {
                Failure::Retryable(message)
            } else {
                Failure::Fatal(LlmError::Transport { attempts: 1, message })
            });
        }
        if self.config.stream {
            let reader = BufReader::new(response.into_body().into_reader());
            let mut out = String::new();
            for line in reader.lines() {
                let line = line.map_err(|e| Failure::Retryable(e.to_string()))?;
                let Some(data) = line.strip_prefix("data:") else {
                    continue;
                };
                let data = data.trim();
                if data == "[DONE]" {
                    break;
                }
                let chunk: StreamChunk =
                    serde_json::from_str(data).map_err(|e| Failure::Retryable(format!("bad stream chunk: {e}")))?;
                for c in chunk.choices {
                    if let Some(delta) = c.delta.content {
                        if let Some(sink) = &self.on_delta {
                            sink(&delta);
                        }
                        out.push_str(&delta);
                    }
                }
            }
            Ok(out)
        } else {
            let completion: Completion = response
                .body_mut()
                .read_json()
                .map_err(|e| Failure::Retryable(format!("bad response body: {e}")))?;
            Ok(completion
                .choices
                .into_iter()
                .next()
                .and_then(|c| c.message.content)
                .unwrap_or_default())
        }
    }
}

impl ChatModel for OpenAiClient {
    fn info(&self) -> ModelInfo {
        ModelInfo {
            model: self.config.model.clone(),
            temperature: self.config.temperature,
        }
    }

    fn complete(&mut self, request: &ChatRequest) -> Result<String, LlmError> {
        let total = self.config.transport_retries + 1;
        let mut last = String::new();
        for attempt in 1..=total {
            match self.attempt(request) {
                Ok(text) => return Ok(text),
                Err(Failure::Fatal(LlmError::Transport { message, .. })) => {
                    return Err(LlmError::Transport {
                        attempts: attempt,
                        message: self.redact(&message),
                    })
                }
                Err(Failure::Fatal(e)) => return Err(e),
                Err(Failure::Retryable(message)) => {
                    tracing::warn!(attempt, "model request failed: {}", self.redact(&message));
                    last = message;
                    if attempt < total {
                        std::thread::sleep(self.backoff * attempt);
                    }
                }
            }
        }
        Err(LlmError::Transport {
            attempts: total,
            message: self.redact(&last),
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn oversize_markers() {
        assert!(is_oversize(r#"{"error":{"code":"context_length_exceeded"}}"#));
        assert!(is_oversize("This model's maximum context length is 8192 tokens"));
        assert!(!is_oversize("rate limited"));
    }

    #[test]
    fn key_is_redacted() {
        let c = OpenAiClient::new(LlmConfig::default(), Some("sk-secret".into())).unwrap();
        assert_eq!(c.redact("bad key sk-secret"), "bad key [redacted]");
    }

    #[test]
    fn unreachable_endpoint_is_a_transport_error() {
        let config = LlmConfig {
            endpoint: "http://127.0.0.1:9".into(),
            transport_retries: 1,
            timeout_secs: 2,
            ..LlmConfig::default()
        };
        let mut c = OpenAiClient::new(config, None)
            .unwrap()
            .with_backoff(Duration::from_millis(1));
        let req = ChatRequest {
            messages: vec![],
            purpose: super::super::Purpose::Summary,
        };
        assert!(matches!(c.complete(&req), Err(LlmError::Transport { attempts: 2, .. })));
    }
}
