use std::time::Duration;

use serde::Deserialize;
use serde_json::json;

use super::{ChatBackend, ChatRequest, ChatResponse, Endpoint, FinishReason, GatewayError, Role, TokenUsage};

/// OpenAI-style `/chat/completions` client.
pub struct HttpChat {
    client: reqwest::blocking::Client,
    url: String,
    auth_ref: Option<String>,
    provider: String,
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
    message: WireMessage,
    #[serde(default)]
    finish_reason: Option<String>,
}

#[derive(Deserialize)]
struct WireMessage {
    #[serde(default)]
    content: Option<String>,
}

#[derive(Deserialize)]
struct WireUsage {
    #[serde(default)]
    prompt_tokens: u64,
    #[serde(default)]
    completion_tokens: u64,
}

impl HttpChat {
    pub fn new(endpoint: &Endpoint) -> Result<Self, GatewayError> {
        let base = endpoint
            .base_url
            .as_deref()
            .ok_or_else(|| GatewayError::InvalidEndpoint("http_chat endpoint needs base_url".into()))?
            .trim_end_matches('/');
        let url = if base.ends_with("/chat/completions") {
            base.to_string()
        } else {
            format!("{base}/chat/completions")
        };
        let client = reqwest::blocking::Client::builder()
            .timeout(Duration::from_secs(endpoint.timeout_secs))
            .build()
            .map_err(|e| GatewayError::InvalidEndpoint(e.to_string()))?;
        Ok(HttpChat {
            client,
            provider: format!("http:{url}"),
            url,
            auth_ref: endpoint.auth_ref.clone(),
        })
    }

    fn body(request: &ChatRequest) -> serde_json::Value {
        let mut messages = Vec::new();
        if let Some(system) = &request.system_prompt {
            messages.push(json!({"role": "system", "content": system}));
        }
        for m in &request.messages {
            let role = match m.role {
                Role::User => "user",
                Role::Assistant => "assistant",
            };
            messages.push(json!({"role": role, "content": m.content}));
        }
        let mut body = json!({
            "model": request.model_id,
            "messages": messages,
            "temperature": request.temperature,
            "max_tokens": request.max_tokens,
        });
        if let Some(seed) = request.request_seed {
            body["seed"] = json!(seed);
        }
        body
    }
}

impl ChatBackend for HttpChat {
    fn send(&self, request: &ChatRequest) -> Result<ChatResponse, GatewayError> {
        let mut builder = self.client.post(&self.url).json(&Self::body(request));
        if let Some(var) = &self.auth_ref {
            let token = std::env::var(var)
                .map_err(|_| GatewayError::AuthFailure(format!("environment variable `{var}` is not set")))?;
            builder = builder.bearer_auth(token);
        }
        let resp = builder.send().map_err(|e| {
            if e.is_timeout() {
                GatewayError::Timeout
            } else {
                GatewayError::ProviderError {
                    status: 0,
                    body: e.to_string(),
                }
            }
        })?;
        let status = resp.status().as_u16();
        let body = resp.text().map_err(|e| {
            if e.is_timeout() {
                GatewayError::Timeout
            } else {
                GatewayError::ProviderError {
                    status,
                    body: e.to_string(),
                }
            }
        })?;
        match status {
            200..=299 => {}
            429 => return Err(GatewayError::RateLimited { attempts: 1 }),
            401 | 403 => return Err(GatewayError::AuthFailure(format!("{status}: {body}"))),
            _ => return Err(GatewayError::ProviderError { status, body }),
        }
        let wire: WireResponse = serde_json::from_str(&body).map_err(|e| GatewayError::ProviderError {
            status,
            body: format!("unreadable response ({e}): {body}"),
        })?;
        let choice = wire.choices.into_iter().next().ok_or_else(|| GatewayError::ProviderError {
            status,
            body: "response has no choices".into(),
        })?;
        let text = choice.message.content.unwrap_or_default();
        let finish_reason = match choice.finish_reason.as_deref() {
            Some("length") => FinishReason::Length,
            _ if text.trim().is_empty() => FinishReason::Error,
            Some("stop") | None => FinishReason::Stop,
            Some(_) => FinishReason::Error,
        };
        let token_usage = wire
            .usage
            .map(|u| TokenUsage {
                prompt: u.prompt_tokens,
                completion: u.completion_tokens,
            })
            .unwrap_or_default();
        Ok(ChatResponse {
            text,
            finish_reason,
            token_usage,
            provider: self.provider.clone(),
            cached: false,
        })
    }

    fn provider(&self) -> &str {
        &self.provider
    }
}
