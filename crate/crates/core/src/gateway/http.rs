//! HTTP chat-completion backend.
//!
//! Speaks the common JSON wire shape: POST `{model, messages|prompt,
//! temperature, max_tokens}` to a configurable endpoint, auth token read
//! from an environment variable, completion text extracted via a
//! configurable dotted JSON path (e.g. `choices.0.message.content` or
//! `content.0.text`).

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::gateway::{Backend, BackendFailure, CompletionRequest};

/// How the prompt is embedded in the request body.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BodyStyle {
    /// `{"messages": [{"role": "user", "content": prompt}], ...}`
    #[default]
    Messages,
    /// `{"prompt": prompt, ...}`
    Prompt,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct HttpBackendConfig {
    pub endpoint: String,
    /// Name of the environment variable holding the auth token. The token
    /// itself is never logged or persisted.
    pub auth_env: Option<String>,
    /// Header carrying the token; `authorization` gets a `Bearer ` prefix.
    #[serde(default = "default_auth_header")]
    pub auth_header: String,
    /// Dotted path to the completion text in the response JSON.
    #[serde(default = "default_response_path")]
    pub response_path: String,
    #[serde(default)]
    pub body_style: BodyStyle,
    #[serde(default = "default_timeout_secs")]
    pub timeout_secs: u64,
}

fn default_auth_header() -> String {
    "authorization".to_string()
}

fn default_response_path() -> String {
    "choices.0.message.content".to_string()
}

fn default_timeout_secs() -> u64 {
    120
}

pub struct HttpBackend {
    name: String,
    config: HttpBackendConfig,
    token: Option<String>,
    client: reqwest::blocking::Client,
}

impl HttpBackend {
    pub fn new(config: HttpBackendConfig) -> Result<Self> {
        let token = match &config.auth_env {
            Some(var) => match std::env::var(var) {
                Ok(value) => Some(value),
                Err(_) => {
                    return Err(Error::Backend {
                        request_id: "<init>".into(),
                        detail: format!("auth environment variable {var} is not set"),
                    })
                }
            },
            None => None,
        };
        let client = reqwest::blocking::Client::builder()
            .timeout(std::time::Duration::from_secs(config.timeout_secs))
            .build()
            .map_err(|e| Error::Backend {
                request_id: "<init>".into(),
                detail: format!("http client construction failed: {e}"),
            })?;
        Ok(HttpBackend {
            name: format!("http:{}", config.endpoint),
            config,
            token,
            client,
        })
    }
}

/// Walk a dotted path through a JSON value; numeric segments index arrays.
fn extract_path<'v>(value: &'v serde_json::Value, path: &str) -> Option<&'v serde_json::Value> {
    let mut current = value;
    for segment in path.split('.') {
        current = match current {
            serde_json::Value::Array(items) => items.get(segment.parse::<usize>().ok()?)?,
            serde_json::Value::Object(map) => map.get(segment)?,
            _ => return None,
        };
    }
    Some(current)
}

impl Backend for HttpBackend {
    fn name(&self) -> &str {
        &self.name
    }

    fn complete(&self, request: &CompletionRequest) -> std::result::Result<String, BackendFailure> {
        let body = match self.config.body_style {
            BodyStyle::Messages => serde_json::json!({
                "model": request.model_tag,
                "messages": [{"role": "user", "content": request.prompt}],
                "temperature": request.temperature,
                "max_tokens": request.max_tokens,
            }),
            BodyStyle::Prompt => serde_json::json!({
                "model": request.model_tag,
                "prompt": request.prompt,
                "temperature": request.temperature,
                "max_tokens": request.max_tokens,
            }),
        };

        let mut call = self.client.post(&self.config.endpoint).json(&body);
        if let Some(token) = &self.token {
            let value = if self.config.auth_header.eq_ignore_ascii_case("authorization") {
                format!("Bearer {token}")
            } else {
                token.clone()
            };
            call = call.header(&self.config.auth_header, value);
        }

        let response = call.send().map_err(|e| {
            // connect failures and timeouts are worth retrying
            if e.is_timeout() || e.is_connect() {
                BackendFailure::Transient(format!("request failed: {e}"))
            } else {
                BackendFailure::Permanent(format!("request failed: {e}"))
            }
        })?;

        let status = response.status();
        let text = response
            .text()
            .map_err(|e| BackendFailure::Transient(format!("body read failed: {e}")))?;

        if status.as_u16() == 429 || status.is_server_error() {
            return Err(BackendFailure::Transient(format!(
                "status {status}: {}",
                truncate(&text, 200)
            )));
        }
        if !status.is_success() {
            return Err(BackendFailure::Permanent(format!(
                "status {status}: {}",
                truncate(&text, 200)
            )));
        }

        let value: serde_json::Value = serde_json::from_str(&text)
            .map_err(|e| BackendFailure::Malformed(format!("response is not JSON: {e}")))?;
        let completion = extract_path(&value, &self.config.response_path)
            .and_then(|v| v.as_str())
            .ok_or_else(|| {
                BackendFailure::Malformed(format!(
                    "no string at response path {:?}",
                    self.config.response_path
                ))
            })?;
        Ok(completion.to_string())
    }
}

fn truncate(text: &str, limit: usize) -> &str {
    match text.char_indices().nth(limit) {
        Some((idx, _)) => &text[..idx],
        None => text,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::io::{Read, Write};
    use std::net::TcpListener;

    fn extract(json: &str, path: &str) -> Option<String> {
        let value: serde_json::Value = serde_json::from_str(json).unwrap();
        extract_path(&value, path).and_then(|v| v.as_str().map(String::from))
    }

    #[test]
    fn dotted_path_walks_objects_and_arrays() {
        let json = r#"{"choices":[{"message":{"content":"hi"}}]}"#;
        assert_eq!(extract(json, "choices.0.message.content").as_deref(), Some("hi"));
        assert_eq!(extract(json, "choices.1.message.content"), None);
        assert_eq!(extract(json, "missing"), None);

        let anthropic = r#"{"content":[{"type":"text","text":"hello"}]}"#;
        assert_eq!(extract(anthropic, "content.0.text").as_deref(), Some("hello"));
    }

    /// One-shot HTTP server returning a canned body.
    fn serve_once(status_line: &'static str, body: &'static str) -> String {
        let listener = TcpListener::bind("127.0.0.1:0").unwrap();
        let addr = listener.local_addr().unwrap();
        std::thread::spawn(move || {
            if let Ok((mut stream, _)) = listener.accept() {
                let mut buf = [0u8; 8192];
                let _ = stream.read(&mut buf);
                let response = format!(
                    "{status_line}\r\ncontent-type: application/json\r\ncontent-length: {}\r\nconnection: close\r\n\r\n{body}",
                    body.len()
                );
                let _ = stream.write_all(response.as_bytes());
            }
        });
        format!("http://{addr}")
    }

    fn request() -> CompletionRequest {
        CompletionRequest {
            prompt: "ping".into(),
            model_tag: "m".into(),
            temperature: 0.0,
            max_tokens: 16,
            request_id: "rq".into(),
        }
    }

    fn backend(endpoint: String) -> HttpBackend {
        HttpBackend::new(HttpBackendConfig {
            endpoint,
            auth_env: None,
            auth_header: default_auth_header(),
            response_path: "choices.0.message.content".into(),
            body_style: BodyStyle::Messages,
            timeout_secs: 5,
        })
        .unwrap()
    }

    #[test]
    fn extracts_completion_text_from_a_live_response() {
        let endpoint = serve_once(
            "HTTP/1.1 200 OK",
            r#"{"choices":[{"message":{"content":"served"}}]}"#,
        );
        let text = backend(endpoint).complete(&request()).unwrap();
        assert_eq!(text, "served");
    }

    #[test]
    fn rate_limit_status_is_transient() {
        let endpoint = serve_once("HTTP/1.1 429 Too Many Requests", "{}");
        let err = backend(endpoint).complete(&request()).unwrap_err();
        assert!(matches!(err, BackendFailure::Transient(_)));
    }

    #[test]
    fn client_error_status_is_permanent() {
        let endpoint = serve_once("HTTP/1.1 400 Bad Request", "{}");
        let err = backend(endpoint).complete(&request()).unwrap_err();
        assert!(matches!(err, BackendFailure::Permanent(_)));
    }

    #[test]
    fn missing_response_path_is_malformed() {
        let endpoint = serve_once("HTTP/1.1 200 OK", r#"{"unexpected":true}"#);
        let err = backend(endpoint).complete(&request()).unwrap_err();
        assert!(matches!(err, BackendFailure::Malformed(_)));
    }

    #[test]
    fn unset_auth_env_fails_at_construction() {
        let result = HttpBackend::new(HttpBackendConfig {
            endpoint: "http://127.0.0.1:1".into(),
            auth_env: Some("RNR_TEST_TOKEN_THAT_DOES_NOT_EXIST".into()),
            auth_header: default_auth_header(),
            response_path: default_response_path(),
            body_style: BodyStyle::Messages,
            timeout_secs: 1,
        });
        assert!(result.is_err());
    }
}
