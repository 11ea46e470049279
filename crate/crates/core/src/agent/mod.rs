//! Character prompts, the tool-calling interaction loop, and the chat
//! backends it can run against.

use std::fmt;
use std::path::PathBuf;
use std::str::FromStr;
use std::sync::Arc;

use serde::{Deserialize, Serialize};
use serde_json::Value;
use thiserror::Error;

use crate::scene::SceneGraph;
use crate::tools::{self, DispatchEffect, ToolCall, ToolResult, ToolSchema, STOP};
use crate::Scene;

mod oracle;
pub mod remote;
mod scripted;

pub use oracle::OracleBackend;
pub use remote::RemoteChat;
pub use scripted::{Script, ScriptedBackend, ScriptedInteraction, ScriptedReply, ScriptedToolCall};

pub const DEFAULT_MODEL: &str = "gpt-4-1106-preview";
pub const DEFAULT_TEMPERATURE: f64 = 1e-8;
pub const DEFAULT_MAX_TOOL_ROUNDS: u32 = 10;
pub const DEFAULT_BASE_URL: &str = "https://api.openai.com/v1";
pub const DEFAULT_API_KEY_ENV: &str = "OPENAI_API_KEY";

/// Content of the tool message answering a `stop` call. The chat format
/// requires every tool call to be answered before the next request.
pub const STOP_ACK: &str = "Stopped.";
/// Content for tool calls listed after `stop` in the same message.
pub const SKIPPED_AFTER_STOP: &str = "Not executed: the interaction was stopped.";

const FULL_RULES: &str = include_str!("../../fixtures/prompts/full_rules.txt");
const RELAXED_RULES: &str = include_str!("../../fixtures/prompts/relaxed_rules.txt");
const RULES_MARKER: &str = "IMPORTANT: Obey the following rules:";

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PromptVariant {
    FullRules,
    RelaxedRules,
    NoRules,
}

impl PromptVariant {
    pub const ALL: [PromptVariant; 3] = [Self::FullRules, Self::RelaxedRules, Self::NoRules];

    pub fn as_str(self) -> &'static str {
        match self {
            Self::FullRules => "full_rules",
            Self::RelaxedRules => "relaxed_rules",
            Self::NoRules => "no_rules",
        }
    }
}

impl fmt::Display for PromptVariant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for PromptVariant {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Self::ALL
            .into_iter()
            .find(|v| v.as_str() == s)
            .ok_or_else(|| format!("unknown prompt variant `{s}` (expected full_rules, relaxed_rules or no_rules)"))
    }
}

pub fn build_prompt(variant: PromptVariant) -> String {
    let full = FULL_RULES.strip_suffix('\n').unwrap_or(FULL_RULES);
    match variant {
        PromptVariant::FullRules => full.to_string(),
        PromptVariant::RelaxedRules => RELAXED_RULES.strip_suffix('\n').unwrap_or(RELAXED_RULES).to_string(),
        PromptVariant::NoRules => {
            let line_start = full
                .match_indices(RULES_MARKER)
                .map(|(i, _)| i)
                .find(|&i| i == 0 || full.as_bytes()[i - 1] == b'\n')
                .expect("full rules contain the rules marker line");
            full[..line_start].to_string()
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum AgentError {
    #[error("utterance text is empty")]
    EmptyUtterance,
    #[error("invalid agent configuration: {0}")]
    Config(String),
}

pub fn format_utterance(speaker: &str, listener: &str, text: &str) -> Result<String, AgentError> {
    if text.trim().is_empty() {
        return Err(AgentError::EmptyUtterance);
    }
    Ok(format!("{speaker} said to {listener}: {text}"))
}

/// Inverse of [`format_utterance`].
pub fn parse_utterance(message: &str) -> Option<(&str, &str, &str)> {
    let (speaker, rest) = message.split_once(" said to ")?;
    let (listener, text) = rest.split_once(": ")?;
    Some((speaker, listener, text))
}

// ---------------------------------------------------------------------------
// Messages and backends
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Role {
    System,
    User,
    Assistant,
    Tool,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ChatMessage {
    pub role: Role,
    #[serde(default)]
    pub content: String,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub tool_calls: Vec<ToolCall>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub call_id: Option<String>,
}

impl ChatMessage {
    pub fn system(content: impl Into<String>) -> Self {
        Self::plain(Role::System, content)
    }

    pub fn user(content: impl Into<String>) -> Self {
        Self::plain(Role::User, content)
    }

    pub fn assistant(reply: &AssistantReply) -> Self {
        Self {
            role: Role::Assistant,
            content: reply.text.clone().unwrap_or_default(),
            tool_calls: reply.tool_calls.clone(),
            call_id: None,
        }
    }

    pub fn tool(call_id: impl Into<String>, content: impl Into<String>) -> Self {
        Self {
            role: Role::Tool,
            content: content.into(),
            tool_calls: Vec::new(),
            call_id: Some(call_id.into()),
        }
    }

    fn plain(role: Role, content: impl Into<String>) -> Self {
        Self {
            role,
            content: content.into(),
            tool_calls: Vec::new(),
            call_id: None,
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct AssistantReply {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub text: Option<String>,
    #[serde(default)]
    pub tool_calls: Vec<ToolCall>,
}

pub struct CompletionRequest<'a> {
    pub messages: &'a [ChatMessage],
    pub tools: &'a Value,
    pub model_name: &'a str,
    pub temperature: f64,
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("{0}")]
pub struct BackendError(pub String);

pub trait ChatBackend: Send + Sync {
    fn complete(&self, request: &CompletionRequest<'_>) -> Result<AssistantReply, BackendError>;
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum BackendSpec {
    Oracle,
    Scripted { script: PathBuf },
    Remote,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AgentConfig {
    pub variant: PromptVariant,
    pub backend: BackendSpec,
    pub model_name: String,
    pub temperature: f64,
    pub random_seed: u64,
    pub max_tool_rounds: u32,
    pub base_url: String,
    pub api_key_env: String,
    pub request_timeout_secs: u64,
}

impl Default for AgentConfig {
    fn default() -> Self {
        Self {
            variant: PromptVariant::FullRules,
            backend: BackendSpec::Oracle,
            model_name: DEFAULT_MODEL.into(),
            temperature: DEFAULT_TEMPERATURE,
            random_seed: 0,
            max_tool_rounds: DEFAULT_MAX_TOOL_ROUNDS,
            base_url: DEFAULT_BASE_URL.into(),
            api_key_env: DEFAULT_API_KEY_ENV.into(),
            request_timeout_secs: 120,
        }
    }
}

impl AgentConfig {
    pub fn validate(&self) -> Result<(), AgentError> {
        if !(self.temperature >= 0.0) {
            return Err(AgentError::Config("temperature must be >= 0".into()));
        }
        if self.max_tool_rounds < 1 {
            return Err(AgentError::Config("max_tool_rounds must be >= 1".into()));
        }
        Ok(())
    }

    /// Instantiates the configured backend. Scripts are read from disk here.
    pub fn make_backend(&self) -> Result<Arc<dyn ChatBackend>, AgentError> {
        self.validate()?;
        Ok(match &self.backend {
            BackendSpec::Oracle => Arc::new(OracleBackend),
            BackendSpec::Scripted { script } => {
                let text = std::fs::read_to_string(script)
                    .map_err(|e| AgentError::Config(format!("cannot read script {}: {e}", script.display())))?;
                let script = Script::from_json(&text).map_err(|e| AgentError::Config(e.to_string()))?;
                Arc::new(ScriptedBackend::new(script))
            }
            BackendSpec::Remote => Arc::new(RemoteChat::from_config(self).map_err(|e| AgentError::Config(e.0))?),
        })
    }
}

// ---------------------------------------------------------------------------
// Traces
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CallStatus {
    /// A query was answered.
    Answered,
    /// The call was refused before touching the scene (unknown tool or entity, missing argument).
    Rejected,
    Succeeded,
    Failed,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "event", rename_all = "snake_case")]
pub enum TraceEvent {
    AssistantText {
        text: String,
    },
    ToolCall {
        call: ToolCall,
        result: ToolResult,
        status: CallStatus,
    },
    Speak {
        call: ToolCall,
        result: ToolResult,
        person: String,
        text: String,
    },
    Stop {
        call_id: String,
    },
    RoundLimit {
        rounds: u32,
    },
    BackendError {
        message: String,
    },
}

impl TraceEvent {
    pub fn is_termination(&self) -> bool {
        matches!(self, Self::Stop { .. } | Self::RoundLimit { .. } | Self::BackendError { .. })
    }

    /// Stable snake_case name of the variant.
    pub fn kind(&self) -> &'static str {
        match self {
            Self::AssistantText { .. } => "assistant_text",
            Self::ToolCall { .. } => "tool_call",
            Self::Speak { .. } => "speak",
            Self::Stop { .. } => "stop",
            Self::RoundLimit { .. } => "round_limit",
            Self::BackendError { .. } => "backend_error",
        }
    }

    /// One line for people to read.
    pub fn render(&self) -> String {
        match self {
            Self::AssistantText { text } => format!("assistant: {text}"),
            Self::ToolCall { call, result, .. } => {
                let args: Vec<String> = call.arguments.iter().map(|(k, v)| format!("{k}={v}")).collect();
                format!("{}({}) -> {}", call.name, args.join(", "), result.content)
            }
            Self::Speak { person, text, .. } => format!("the_robot to {person}: {text}"),
            Self::Stop { .. } => "stop".into(),
            Self::RoundLimit { rounds } => format!("gave up after {rounds} rounds"),
            Self::BackendError { message } => format!("backend error: {message}"),
        }
    }

    /// The tool call this event records, if any.
    pub fn call(&self) -> Option<&ToolCall> {
        match self {
            Self::ToolCall { call, .. } | Self::Speak { call, .. } => Some(call),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Termination {
    Stopped,
    RoundLimit,
    BackendError,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InteractionTrace {
    pub input_utterance: String,
    pub events: Vec<TraceEvent>,
    pub termination: Termination,
    /// Number of backend requests made.
    pub rounds: u32,
}

impl InteractionTrace {
    pub fn tool_names(&self) -> Vec<&str> {
        self.events
            .iter()
            .filter_map(|e| match e {
                TraceEvent::Stop { .. } => Some(STOP),
                other => other.call().map(|c| c.name.as_str()),
            })
            .collect()
    }
}

// ---------------------------------------------------------------------------
// Session
// ---------------------------------------------------------------------------

/// A running conversation: one scene, one history, one backend.
pub struct Session {
    pub scene: Scene,
    config: AgentConfig,
    backend: Arc<dyn ChatBackend>,
    history: Vec<ChatMessage>,
    schemas: Value,
}

impl Session {
    pub fn new(scene: Scene, config: AgentConfig, backend: Arc<dyn ChatBackend>) -> Result<Self, AgentError> {
        config.validate()?;
        let registry: Vec<ToolSchema> = tools::registry();
        Ok(Self {
            scene,
            history: vec![ChatMessage::system(build_prompt(config.variant))],
            schemas: tools::serialize_schemas(&registry),
            config,
            backend,
        })
    }

    pub fn from_config(scene: Scene, config: AgentConfig) -> Result<Self, AgentError> {
        let backend = config.make_backend()?;
        Self::new(scene, config, backend)
    }

    pub fn config(&self) -> &AgentConfig {
        &self.config
    }

    pub fn history(&self) -> &[ChatMessage] {
        &self.history
    }

    pub fn run_interaction(&mut self, speaker: &str, listener: &str, text: &str) -> Result<InteractionTrace, AgentError> {
        self.run_interaction_observed(speaker, listener, text, &mut |_, _| {})
    }

    /// Runs one interaction, reporting each event as it happens together
    /// with the scene as it stands after the event.
    pub fn run_interaction_observed(
        &mut self,
        speaker: &str,
        listener: &str,
        text: &str,
        observer: &mut dyn FnMut(&TraceEvent, &SceneGraph<f64>),
    ) -> Result<InteractionTrace, AgentError> {
        let utterance = format_utterance(speaker, listener, text)?;
        self.history.push(ChatMessage::user(utterance.clone()));
        let mut events = Vec::new();
        let mut emit = |event: TraceEvent, scene: &Scene, events: &mut Vec<TraceEvent>| {
            observer(&event, scene);
            events.push(event);
        };

        let mut rounds = 0;
        let termination = loop {
            if rounds >= self.config.max_tool_rounds {
                emit(TraceEvent::RoundLimit { rounds }, &self.scene, &mut events);
                break Termination::RoundLimit;
            }
            rounds += 1;
            let reply = {
                let request = CompletionRequest {
                    messages: &self.history,
                    tools: &self.schemas,
                    model_name: &self.config.model_name,
                    temperature: self.config.temperature,
                    seed: self.config.random_seed,
                };
                self.backend.complete(&request)
            };
            let reply = match reply {
                Ok(r) => r,
                Err(e) => {
                    emit(TraceEvent::BackendError { message: e.0 }, &self.scene, &mut events);
                    break Termination::BackendError;
                }
            };
            self.history.push(ChatMessage::assistant(&reply));
            if let Some(text) = reply.text.as_ref().filter(|t| !t.trim().is_empty()) {
                emit(TraceEvent::AssistantText { text: text.clone() }, &self.scene, &mut events);
            }

            let mut stopped = false;
            for call in &reply.tool_calls {
                if stopped {
                    self.history.push(ChatMessage::tool(&call.call_id, SKIPPED_AFTER_STOP));
                    continue;
                }
                if call.name == STOP {
                    self.history.push(ChatMessage::tool(&call.call_id, STOP_ACK));
                    emit(
                        TraceEvent::Stop {
                            call_id: call.call_id.clone(),
                        },
                        &self.scene,
                        &mut events,
                    );
                    stopped = true;
                    continue;
                }
                let dispatched = tools::dispatch(&mut self.scene, call);
                self.history
                    .push(ChatMessage::tool(&call.call_id, dispatched.result.content.clone()));
                let rejected = is_rejection_text(&dispatched.result.content);
                let event = match dispatched.effect {
                    DispatchEffect::Spoke { person, text } => TraceEvent::Speak {
                        call: call.clone(),
                        result: dispatched.result,
                        person,
                        text,
                    },
                    effect => TraceEvent::ToolCall {
                        call: call.clone(),
                        result: dispatched.result,
                        status: match effect {
                            DispatchEffect::Acted { outcome } if outcome.is_success() => CallStatus::Succeeded,
                            DispatchEffect::Acted { .. } => CallStatus::Failed,
                            _ if rejected || tools::kind_of(&call.name) != Some(tools::ToolKind::Query) => {
                                CallStatus::Rejected
                            }
                            _ => CallStatus::Answered,
                        },
                    },
                };
                emit(event, &self.scene, &mut events);
            }
            if stopped {
                break Termination::Stopped;
            }
        };

        Ok(InteractionTrace {
            input_utterance: utterance,
            events,
            termination,
            rounds,
        })
    }
}

/// Whether a tool result is one of the fixed rejection sentences.
pub fn is_rejection_text(content: &str) -> bool {
    (content.starts_with("There is no ") && content.ends_with(" in the scene."))
        || content.starts_with("Unknown function ")
        || content.starts_with("Missing argument ")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn variant_names_round_trip() {
        for v in PromptVariant::ALL {
            assert_eq!(v.as_str().parse::<PromptVariant>().unwrap(), v);
        }
        assert!("some_rules".parse::<PromptVariant>().is_err());
    }

    #[test]
    fn utterance_format_and_parse() {
        let u = format_utterance("Daniel", "the_robot", "Stop.").unwrap();
        assert_eq!(u, "Daniel said to the_robot: Stop.");
        assert_eq!(parse_utterance(&u), Some(("Daniel", "the_robot", "Stop.")));
        assert_eq!(format_utterance("Felix", "Daniel", ""), Err(AgentError::EmptyUtterance));
    }

    #[test]
    fn config_validation() {
        let mut c = AgentConfig::default();
        assert!(c.validate().is_ok());
        c.max_tool_rounds = 0;
        assert!(c.validate().is_err());
        c.max_tool_rounds = 1;
        c.temperature = -1.0;
        assert!(c.validate().is_err());
    }
}
