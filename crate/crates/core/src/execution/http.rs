use std::time::Duration;

use reqwest::blocking::Client;
use reqwest::StatusCode;
use serde::{Deserialize, Serialize};
use serde_json::json;

use super::{ExecError, ExecutionResult, Executor};
use crate::space::{Primitive, PrimitiveSpace};

fn default_retries() -> u32 {
    2
}

fn default_timeout() -> u64 {
    120
}

/// Chat-completions endpoint settings.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct HttpConfig {
    /// Full URL of the chat-completions route.
    pub url: String,
    /// Literal key; prefer `api_key_env`.
    #[serde(default, skip_serializing)]
    pub api_key: Option<String>,
    /// Name of an environment variable holding the key.
    #[serde(default)]
    pub api_key_env: Option<String>,
    #[serde(default)]
    pub temperature: f64,
    /// Extra attempts after a transport error, 429 or 5xx.
    #[serde(default = "default_retries")]
    pub retries: u32,
    #[serde(default = "default_timeout")]
    pub timeout_secs: u64,
}

impl HttpConfig {
    pub fn new(url: impl Into<String>) -> Self {
        Self {
            url: url.into(),
            api_key: None,
            api_key_env: None,
            temperature: 0.0,
            retries: default_retries(),
            timeout_secs: default_timeout(),
        }
    }
}

/// System message sent for each step:
///
/// ```text
/// You are the {role}. Work in the {pattern} style.
/// Tools available to you: {tool, tool, ..|none}.
/// Read the input and reply with your output only.
/// ```
pub fn render_system_message(p: &Primitive) -> String {
    let tools = if p.tools.is_empty() {
        "none".to_string()
    } else {
        p.tools.iter().cloned().collect::<Vec<_>>().join(", ")
    };
    format!(
        "You are the {}. Work in the {} style.\nTools available to you: {}.\nRead the input and reply with your output only.",
        p.role, p.pattern, tools
    )
}

/// The fields read from a chat-completions response body.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ChatReply {
    pub content: Option<String>,
    pub total_tokens: Option<u64>,
}

#[derive(Deserialize)]
struct RawResponse {
    #[serde(default)]
    choices: Vec<RawChoice>,
    usage: Option<RawUsage>,
}

#[derive(Deserialize)]
struct RawChoice {
    message: Option<RawMessage>,
}

#[derive(Deserialize)]
struct RawMessage {
    content: Option<String>,
}

#[derive(Deserialize)]
struct RawUsage {
    total_tokens: Option<u64>,
}

pub fn parse_chat_response(body: &[u8]) -> Result<ChatReply, serde_json::Error> {
    let raw: RawResponse = serde_json::from_slice(body)?;
    let content = raw
        .choices
        .into_iter()
        .next()
        .and_then(|c| c.message)
        .and_then(|m| m.content);
    Ok(ChatReply {
        content,
        total_tokens: raw.usage.and_then(|u| u.total_tokens),
    })
}

/// Runs a workflow as a chain of chat calls, piping each step's reply into
/// the next step's user message.
#[derive(Debug, Clone)]
pub struct HttpExecutor {
    cfg: HttpConfig,
    key: Option<String>,
    client: Client,
}

enum StepOutcome {
    Text(String, Option<u64>),
    Failed,
}

impl HttpExecutor {
    pub fn new(cfg: HttpConfig) -> Result<Self, ExecError> {
        let key = match (&cfg.api_key, &cfg.api_key_env) {
            (Some(k), _) => Some(k.clone()),
            (None, Some(var)) => Some(
                std::env::var(var).map_err(|_| ExecError::Config(format!("environment variable {var} is not set")))?,
            ),
            (None, None) => None,
        };
        let client = Client::builder()
            .timeout(Duration::from_secs(cfg.timeout_secs))
            .build()
            .map_err(|e| ExecError::Config(e.to_string()))?;
        Ok(Self { cfg, key, client })
    }

    fn call(&self, p: &Primitive, input: &str) -> Result<StepOutcome, ExecError> {
        let body = json!({
            "model": p.model,
            "messages": [
                {"role": "system", "content": render_system_message(p)},
                {"role": "user", "content": input},
            ],
            "temperature": self.cfg.temperature,
        });
        let mut attempt = 0;
        loop {
            let mut req = self.client.post(&self.cfg.url).json(&body);
            if let Some(key) = &self.key {
                req = req.bearer_auth(key);
            }
            let retryable = attempt < self.cfg.retries;
            attempt += 1;
            let resp = match req.send() {
                Ok(r) => r,
                Err(_) if retryable => continue,
                Err(e) => return Err(ExecError::Transport(e.to_string())),
            };
            let status = resp.status();
            if status == StatusCode::UNAUTHORIZED || status == StatusCode::FORBIDDEN {
                return Err(ExecError::Auth(status.as_u16()));
            }
            if status == StatusCode::TOO_MANY_REQUESTS || status.is_server_error() {
                if retryable {
                    continue;
                }
                return Ok(StepOutcome::Failed);
            }
            if !status.is_success() {
                return Ok(StepOutcome::Failed);
            }
            let bytes = match resp.bytes() {
                Ok(b) => b,
                Err(_) if retryable => continue,
                Err(e) => return Err(ExecError::Transport(e.to_string())),
            };
            return Ok(match parse_chat_response(&bytes) {
                Ok(ChatReply {
                    content: Some(text),
                    total_tokens,
                }) if !text.trim().is_empty() => StepOutcome::Text(text, total_tokens),
                _ => StepOutcome::Failed,
            });
        }
    }
}

impl Executor for HttpExecutor {
    fn execute(&self, space: &PrimitiveSpace, steps: &[usize], task: &str) -> Result<ExecutionResult, ExecError> {
        let mut tokens = 0u64;
        let mut current = task.to_string();
        for (pos, &step) in steps.iter().enumerate() {
            let p = space.get(step);
            match self.call(p, &current)? {
                StepOutcome::Text(text, usage) => {
                    tokens += usage.unwrap_or(p.cost);
                    current = text;
                }
                StepOutcome::Failed => {
                    tokens += p.cost;
                    return Ok(ExecutionResult::failure(pos + 1, tokens));
                }
            }
        }
        Ok(ExecutionResult::success(current, tokens))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_content_and_usage() {
        let body = br#"{"choices":[{"message":{"role":"assistant","content":"OK"}}],"usage":{"total_tokens":12}}"#;
        let reply = parse_chat_response(body).unwrap();
        assert_eq!(reply.content.as_deref(), Some("OK"));
        assert_eq!(reply.total_tokens, Some(12));

        let reply = parse_chat_response(br#"{"choices":[]}"#).unwrap();
        assert_eq!(
            reply,
            ChatReply {
                content: None,
                total_tokens: None
            }
        );
        assert!(parse_chat_response(b"not json").is_err());
    }

    #[test]
    fn system_message_lists_tools() {
        let p = Primitive::new("a", "analyst", "m", "react").with_tools(["sql", "python"]);
        let msg = render_system_message(&p);
        assert!(msg.starts_with("You are the analyst. Work in the react style."));
        assert!(msg.contains("Tools available to you: python, sql."));
        let bare = render_system_message(&Primitive::new("b", "writer", "m", "cot"));
        assert!(bare.contains("Tools available to you: none."));
    }

    #[test]
    fn missing_key_variable_is_config_error() {
        let mut cfg = HttpConfig::new("http://127.0.0.1:9/v1/chat/completions");
        cfg.api_key_env = Some("WFRECON_TEST_UNSET_KEY_VAR".into());
        assert!(matches!(HttpExecutor::new(cfg), Err(ExecError::Config(_))));
    }
}
