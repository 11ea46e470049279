//! Replays checked-in assistant replies.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::{AssistantReply, BackendError, ChatBackend, ChatMessage, CompletionRequest, Role};
use crate::tools::ToolCall;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ScriptedToolCall {
    pub name: String,
    #[serde(default)]
    pub arguments: BTreeMap<String, String>,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ScriptedReply {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub text: Option<String>,
    #[serde(default)]
    pub tool_calls: Vec<ScriptedToolCall>,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ScriptedInteraction {
    pub rounds: Vec<ScriptedReply>,
    /// Keep answering with the last round once the list runs out.
    #[serde(default)]
    pub repeat_last: bool,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Script {
    pub interactions: Vec<ScriptedInteraction>,
}

impl Script {
    pub fn from_json(text: &str) -> Result<Self, serde_json::Error> {
        serde_json::from_str(text)
    }

    /// A script with one interaction made of the given rounds, each round a
    /// list of `(tool name, arguments)`.
    pub fn single(rounds: Vec<Vec<(&str, Vec<(&str, &str)>)>>, repeat_last: bool) -> Self {
        let rounds = rounds
            .into_iter()
            .map(|calls| ScriptedReply {
                text: None,
                tool_calls: calls
                    .into_iter()
                    .map(|(name, args)| ScriptedToolCall {
                        name: name.to_string(),
                        arguments: args.into_iter().map(|(k, v)| (k.to_string(), v.to_string())).collect(),
                    })
                    .collect(),
            })
            .collect();
        Self {
            interactions: vec![ScriptedInteraction { rounds, repeat_last }],
        }
    }
}

/// Answers from a [`Script`], indexed by the number of user messages and
/// assistant replies already in the history. Holds no mutable state.
pub struct ScriptedBackend {
    script: Script,
}

impl ScriptedBackend {
    pub fn new(script: Script) -> Self {
        Self { script }
    }
}

/// `(interaction index, round index)` of the next reply, derived from history.
pub(super) fn position(messages: &[ChatMessage]) -> (usize, usize) {
    let users = messages.iter().filter(|m| m.role == Role::User).count();
    let last_user = messages.iter().rposition(|m| m.role == Role::User).unwrap_or(0);
    let rounds = messages[last_user..]
        .iter()
        .filter(|m| m.role == Role::Assistant)
        .count();
    (users.saturating_sub(1), rounds)
}

impl ChatBackend for ScriptedBackend {
    fn complete(&self, request: &CompletionRequest<'_>) -> Result<AssistantReply, BackendError> {
        let (i, r) = position(request.messages);
        let interaction = self
            .script
            .interactions
            .get(i)
            .ok_or_else(|| BackendError(format!("script has no interaction {}", i + 1)))?;
        let reply = match interaction.rounds.get(r) {
            Some(reply) => reply,
            None if interaction.repeat_last && !interaction.rounds.is_empty() => interaction.rounds.last().unwrap(),
            None => return Err(BackendError(format!("script interaction {} has no round {}", i + 1, r + 1))),
        };
        Ok(AssistantReply {
            text: reply.text.clone(),
            tool_calls: reply
                .tool_calls
                .iter()
                .enumerate()
                .map(|(k, c)| ToolCall {
                    call_id: format!("call_{i}_{r}_{k}"),
                    name: c.name.clone(),
                    arguments: c.arguments.clone(),
                })
                .collect(),
        })
    }
}
