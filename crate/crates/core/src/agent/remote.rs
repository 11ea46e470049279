//! Chat-completions client for a live model.

use std::time::Duration;

use serde_json::{json, Value};

use super::{AgentConfig, AssistantReply, BackendError, ChatBackend, ChatMessage, CompletionRequest, Role};
use crate::tools::{parse_tool_call, ToolCall};

/// Blocking HTTP client; one instance can serve many sessions at once.
pub struct RemoteChat {
    client: reqwest::blocking::Client,
    endpoint: String,
    api_key: Option<String>,
}

impl RemoteChat {
    pub fn new(base_url: &str, api_key: Option<String>, timeout: Duration) -> Result<Self, BackendError> {
        let client = reqwest::blocking::Client::builder()
            .timeout(timeout)
            .build()
            .map_err(|e| BackendError(format!("cannot build HTTP client: {e}")))?;
        Ok(Self {
            client,
            endpoint: format!("{}/chat/completions", base_url.trim_end_matches('/')),
            api_key,
        })
    }

    /// Reads the API key from the configured environment variable. A
    /// missing key is not an error here; the endpoint decides.
    pub fn from_config(config: &AgentConfig) -> Result<Self, BackendError> {
        let key = std::env::var(&config.api_key_env).ok().filter(|k| !k.is_empty());
        Self::new(&config.base_url, key, Duration::from_secs(config.request_timeout_secs))
    }
}

pub fn message_to_json(message: &ChatMessage) -> Value {
    match message.role {
        Role::System => json!({"role": "system", "content": message.content}),
        Role::User => json!({"role": "user", "content": message.content}),
        Role::Tool => json!({
            "role": "tool",
            "tool_call_id": message.call_id.clone().unwrap_or_default(),
            "content": message.content,
        }),
        Role::Assistant => {
            let mut m = json!({"role": "assistant"});
            m["content"] = if message.content.is_empty() {
                Value::Null
            } else {
                Value::String(message.content.clone())
            };
            if !message.tool_calls.is_empty() {
                m["tool_calls"] = message.tool_calls.iter().map(call_to_json).collect();
            }
            m
        }
    }
}

fn call_to_json(call: &ToolCall) -> Value {
    json!({
        "id": call.call_id,
        "type": "function",
        "function": {
            "name": call.name,
            "arguments": serde_json::to_string(&call.arguments).expect("string map serializes"),
        },
    })
}

pub fn request_body(request: &CompletionRequest<'_>) -> Value {
    json!({
        "model": request.model_name,
        "messages": request.messages.iter().map(message_to_json).collect::<Vec<_>>(),
        "tools": request.tools,
        "temperature": request.temperature,
        "seed": request.seed,
    })
}

pub fn parse_response(body: &Value) -> Result<AssistantReply, BackendError> {
    let message = body
        .pointer("/choices/0/message")
        .ok_or_else(|| BackendError("response has no choices[0].message".into()))?;
    let text = message.get("content").and_then(Value::as_str).map(str::to_string);
    let mut tool_calls = Vec::new();
    if let Some(calls) = message.get("tool_calls").and_then(Value::as_array) {
        for (k, call) in calls.iter().enumerate() {
            let id = call
                .get("id")
                .and_then(Value::as_str)
                .map(str::to_string)
                .unwrap_or_else(|| format!("call_{k}"));
            let name = call
                .pointer("/function/name")
                .and_then(Value::as_str)
                .ok_or_else(|| BackendError(format!("tool call {id} has no function name")))?;
            let args = call.pointer("/function/arguments").and_then(Value::as_str).unwrap_or("");
            // Unparseable arguments become an empty map so the model gets a
            // "Missing argument" result instead of the interaction aborting.
            let parsed = parse_tool_call(&id, name, args).unwrap_or_else(|_| ToolCall {
                call_id: id.clone(),
                name: name.to_string(),
                arguments: Default::default(),
            });
            tool_calls.push(parsed);
        }
    }
    Ok(AssistantReply { text, tool_calls })
}

impl ChatBackend for RemoteChat {
    fn complete(&self, request: &CompletionRequest<'_>) -> Result<AssistantReply, BackendError> {
        let mut http = self.client.post(&self.endpoint).json(&request_body(request));
        if let Some(key) = &self.api_key {
            http = http.bearer_auth(key);
        }
        let response = http
            .send()
            .map_err(|e| BackendError(format!("request to {} failed: {e}", self.endpoint)))?;
        let status = response.status();
        let text = response
            .text()
            .map_err(|e| BackendError(format!("cannot read response body: {e}")))?;
        if !status.is_success() {
            let snippet: String = text.chars().take(300).collect();
            return Err(BackendError(format!("HTTP {status}: {snippet}")));
        }
        let body: Value = serde_json::from_str(&text).map_err(|e| BackendError(format!("malformed response: {e}")))?;
        parse_response(&body)
    }
}
