//! Rule-based stand-in for the language model.
//!
//! The policy is a pure function of the message history: it re-reads the
//! calls it already made in the current interaction (and their results) and
//! issues the next one. Anything it does not recognise ends in `stop`.

use std::collections::BTreeMap;

use super::{is_rejection_text, parse_utterance, scripted, AssistantReply, BackendError, ChatBackend, ChatMessage,
    CompletionRequest, Role};
use crate::scene::{display_name, normalize_object_name, ROBOT_ID};
use crate::tools::{
    ToolCall, CHECK_HINDERING_REASONS, EVERYONE, GET_OBJECTS, HAND_OBJECT_OVER_TO_PERSON, IS_PERSON_BUSY_OR_IDLE,
    MOVE_OBJECT_TO_PERSON, POUR_INTO, SPEAK, STOP,
};

pub struct OracleBackend;

impl ChatBackend for OracleBackend {
    fn complete(&self, request: &CompletionRequest<'_>) -> Result<AssistantReply, BackendError> {
        let (i, r) = scripted::position(request.messages);
        let next = next_call(request.messages);
        Ok(AssistantReply {
            text: None,
            tool_calls: vec![ToolCall {
                call_id: format!("oracle_{i}_{r}"),
                name: next.name.to_string(),
                arguments: next.args,
            }],
        })
    }
}

struct Next {
    name: &'static str,
    args: BTreeMap<String, String>,
}

fn call(name: &'static str, args: &[(&str, &str)]) -> Next {
    Next {
        name,
        args: args.iter().map(|(k, v)| (k.to_string(), v.to_string())).collect(),
    }
}

/// A call made earlier in the history together with its result.
struct Made {
    name: String,
    args: BTreeMap<String, String>,
    result: String,
}

fn calls_with_results(messages: &[ChatMessage]) -> Vec<Made> {
    let results: BTreeMap<&str, &str> = messages
        .iter()
        .filter(|m| m.role == Role::Tool)
        .filter_map(|m| Some((m.call_id.as_deref()?, m.content.as_str())))
        .collect();
    messages
        .iter()
        .filter(|m| m.role == Role::Assistant)
        .flat_map(|m| &m.tool_calls)
        .filter_map(|c| {
            Some(Made {
                name: c.name.clone(),
                args: c.arguments.clone(),
                result: results.get(c.call_id.as_str())?.to_string(),
            })
        })
        .collect()
}

/// Calls and results found in a stretch of history.
struct Memory {
    made: Vec<Made>,
}

impl Memory {
    fn succeeded<'a>(&'a self, name: &'a str, prefix: &'a str) -> impl Iterator<Item = &'a Made> + 'a {
        self.made
            .iter()
            .filter(move |m| m.name == name && m.result.starts_with(prefix))
    }

    /// Last known busy state of a person, from any query result.
    fn busy(&self, person: &str) -> Option<bool> {
        let (busy, idle) = (format!("{person} is busy."), format!("{person} is idle."));
        self.made.iter().rev().find_map(|m| {
            let b = m.result.rfind(&busy);
            let i = m.result.rfind(&idle);
            match (b, i) {
                (None, None) => None,
                (b, i) => Some(b > i),
            }
        })
    }

    /// Object whose most recent delivery went to `person`.
    fn delivered_to(&self, object: &str) -> Option<&str> {
        self.made
            .iter()
            .filter(|m| {
                (m.name == MOVE_OBJECT_TO_PERSON && m.result.starts_with("the_robot moved"))
                    || (m.name == HAND_OBJECT_OVER_TO_PERSON && m.result.starts_with("the_robot handed"))
            })
            .filter(|m| m.args.get("object_name").map(String::as_str) == Some(object))
            .last()
            .and_then(|m| m.args.get("person_name").map(String::as_str))
    }

    fn pour_sources_into(&self, container: &str) -> Vec<&str> {
        self.succeeded(POUR_INTO, "the_robot poured")
            .filter(|m| m.args.get("target_container_name").map(String::as_str) == Some(container))
            .filter_map(|m| m.args.get("source_container_name").map(String::as_str))
            .collect()
    }

    fn last_pour_source(&self) -> Option<&str> {
        self.succeeded(POUR_INTO, "the_robot poured")
            .last()
            .and_then(|m| m.args.get("source_container_name").map(String::as_str))
    }
}

enum Intent {
    HandMe(String),
    WhatDrinks,
    DrinksAnswer(String),
    PourMe(String),
    SameWithoutSugar,
}

fn strip_phrase(rest: &str) -> String {
    rest.trim().trim_end_matches(['.', '?', '!']).trim().to_string()
}

fn parse_intent(text: &str) -> Option<Intent> {
    let lower = text.to_lowercase();
    if lower.contains("without sugar") {
        return Some(Intent::SameWithoutSugar);
    }
    if let Some(i) = lower.find("pour me some ") {
        return Some(Intent::PourMe(strip_phrase(&text[i + "pour me some ".len()..])));
    }
    if lower.contains("what drinks") {
        return Some(Intent::WhatDrinks);
    }
    if lower.starts_with("we have ") {
        return Some(Intent::DrinksAnswer(lower));
    }
    for verb in ["hand me ", "pass me ", "give me "] {
        if let Some(i) = lower.find(verb) {
            return Some(Intent::HandMe(strip_phrase(&text[i + verb.len()..])));
        }
    }
    None
}

/// Everything the policy needs for one decision. `call` either returns the
/// result of a call already made in this interaction or yields that call as
/// the next step.
struct Turn<'a> {
    sender: &'a str,
    receiver: &'a str,
    current: &'a [Made],
    /// The whole history, current interaction included.
    memory: &'a Memory,
    /// History up to the current utterance; decisions that the current
    /// interaction's own actions would change are based on this.
    before: &'a Memory,
}

impl Turn<'_> {
    fn call(&self, name: &'static str, args: &[(&str, &str)]) -> Result<String, Next> {
        let wanted = call(name, args);
        self.current
            .iter()
            .find(|m| m.name == name && m.args == wanted.args)
            .map(|m| m.result.clone())
            .ok_or(wanted)
    }

    fn objects(&self) -> Result<Vec<String>, Next> {
        let listing = self.call(GET_OBJECTS, &[])?;
        Ok(listing
            .strip_prefix("Objects in the scene: ")
            .map(|l| l.trim_end_matches('.').split(", ").map(str::to_string).collect())
            .unwrap_or_default())
    }

    fn speak(&self, text: &str) -> Result<String, Next> {
        self.call(SPEAK, &[("person_name", EVERYONE), ("text", text)])
    }

    fn sender_busy(&self) -> bool {
        self.memory.busy(self.sender).unwrap_or(false)
    }
}

fn next_call(messages: &[ChatMessage]) -> Next {
    let Some(last_user) = messages.iter().rposition(|m| m.role == Role::User) else {
        return call(STOP, &[]);
    };
    let Some((sender, receiver, text)) = parse_utterance(&messages[last_user].content) else {
        return call(STOP, &[]);
    };
    let memory = Memory {
        made: calls_with_results(messages),
    };
    let before = Memory {
        made: calls_with_results(&messages[..last_user]),
    };
    let current = calls_with_results(&messages[last_user..]);
    let turn = Turn {
        sender,
        receiver,
        current: &current,
        memory: &memory,
        before: &before,
    };
    let outcome = match parse_intent(text) {
        Some(Intent::HandMe(phrase)) => hand_me(&turn, &normalize_object_name(&phrase)),
        Some(Intent::WhatDrinks) => what_drinks(&turn),
        Some(Intent::DrinksAnswer(answer)) => correct_drinks(&turn, &answer),
        Some(Intent::PourMe(substance)) => pour_me(&turn, Source::Named(normalize_object_name(&substance))),
        Some(Intent::SameWithoutSugar) => pour_me(&turn, Source::SugarFreeOfLast),
        None => Ok(()),
    };
    match outcome {
        Ok(()) => call(STOP, &[]),
        Err(next) => next,
    }
}

/// Parses a `check_hindering_reasons` result into explanation phrases.
fn hindrances(result: &str, person: &str, object: &str) -> (Vec<String>, bool) {
    let mut phrases = Vec::new();
    let busy = result.contains(&format!("{person} is busy."));
    if busy {
        phrases.push(format!("{person} is busy"));
    }
    for verb in ["see", "reach"] {
        if result.contains(&format!("{person} cannot {verb} {object}.")) {
            phrases.push(format!("{person} cannot {verb} {}", display_name(object)));
        }
    }
    (phrases, busy)
}

fn delivery_tool(receiver_busy: bool, sender_busy: bool) -> &'static str {
    if receiver_busy || sender_busy {
        MOVE_OBJECT_TO_PERSON
    } else {
        HAND_OBJECT_OVER_TO_PERSON
    }
}

fn delivery_phrase(tool: &str, object: &str, person: &str) -> String {
    if tool == MOVE_OBJECT_TO_PERSON {
        format!("move {} to {person}", display_name(object))
    } else {
        format!("hand {} over to {person}", display_name(object))
    }
}

fn is_success(result: &str) -> bool {
    result.starts_with("the_robot ")
}

fn hand_me(turn: &Turn<'_>, object: &str) -> Result<(), Next> {
    let (phrases, receiver_busy) = if turn.receiver == ROBOT_ID {
        (Vec::new(), false)
    } else {
        let result = turn.call(
            CHECK_HINDERING_REASONS,
            &[("person_name", turn.receiver), ("object_name", object)],
        )?;
        if is_rejection_text(&result) {
            return Ok(());
        }
        let (phrases, busy) = hindrances(&result, turn.receiver, object);
        if phrases.is_empty() {
            return Ok(());
        }
        (phrases, busy)
    };
    let tool = delivery_tool(receiver_busy, turn.sender_busy());
    let what = delivery_phrase(tool, object, turn.sender);
    let explanation = if phrases.is_empty() {
        format!("Sure, I will {what}.")
    } else {
        format!("{}, so I will {what}.", phrases.join(" and "))
    };
    turn.speak(&explanation)?;
    turn.call(tool, &[("object_name", object), ("person_name", turn.sender)])?;
    Ok(())
}

const BOTTLE_PREFIX: &str = "the_bottle_of_";

fn drinks(objects: &[String]) -> Vec<(&str, String)> {
    objects
        .iter()
        .filter_map(|id| Some((id.as_str(), display_name(id.strip_prefix(BOTTLE_PREFIX)?))))
        .collect()
}

fn what_drinks(turn: &Turn<'_>) -> Result<(), Next> {
    if turn.receiver != ROBOT_ID {
        let result = turn.call(IS_PERSON_BUSY_OR_IDLE, &[("person_name", turn.receiver)])?;
        if !result.contains("is busy") {
            return Ok(());
        }
    }
    let objects = turn.objects()?;
    let names: Vec<String> = drinks(&objects).into_iter().map(|(_, n)| n).collect();
    if names.is_empty() {
        return Ok(());
    }
    turn.speak(&format!("We have {}.", names.join(", ")))?;
    Ok(())
}

/// Names drinks on the table that the answer left out. Longer names are
/// matched first so "cola zero" is not taken as a mention of "cola".
fn correct_drinks(turn: &Turn<'_>, answer: &str) -> Result<(), Next> {
    let objects = turn.objects()?;
    let mut available = drinks(&objects);
    available.sort_by_key(|(_, name)| std::cmp::Reverse(name.len()));
    let mut rest = answer.replace('_', " ");
    let mut missing = Vec::new();
    for (_, name) in &available {
        if rest.contains(name.as_str()) {
            rest = rest.replace(name.as_str(), " ");
        } else {
            missing.push(name.clone());
        }
    }
    if missing.is_empty() {
        return Ok(());
    }
    missing.sort();
    turn.speak(&format!("There is also {} on the table.", missing.join(" and ")))?;
    Ok(())
}

enum Source {
    Named(String),
    SugarFreeOfLast,
}

fn is_container_name(id: &str) -> bool {
    id.contains("glass") || id.contains("cup")
}

fn pour_me(turn: &Turn<'_>, source: Source) -> Result<(), Next> {
    let objects = turn.objects()?;
    let source = match source {
        Source::Named(name) => [
            format!("{BOTTLE_PREFIX}{name}"),
            format!("the_{name}_pot"),
            format!("the_{name}"),
        ]
        .into_iter()
        .find(|id| objects.contains(id)),
        Source::SugarFreeOfLast => turn
            .before
            .last_pour_source()
            .map(|s| format!("{s}_zero"))
            .filter(|id| objects.contains(id)),
    };
    let Some(source) = source else { return Ok(()) };

    let (phrases, receiver_busy) = if turn.receiver == ROBOT_ID {
        (Vec::new(), false)
    } else {
        let result = turn.call(
            CHECK_HINDERING_REASONS,
            &[("person_name", turn.receiver), ("object_name", &source)],
        )?;
        let (phrases, busy) = hindrances(&result, turn.receiver, &source);
        if phrases.is_empty() {
            return Ok(());
        }
        (phrases, busy)
    };

    // Prefer the container the sender already has, unless it holds
    // something else; otherwise take one that was never used.
    let own = objects.iter().filter(|id| is_container_name(id)).find(|id| {
        turn.before.delivered_to(id) == Some(turn.sender)
            && turn.before.pour_sources_into(id).iter().all(|s| *s == source)
    });
    let fresh = || {
        objects.iter().filter(|id| is_container_name(id)).find(|id| {
            turn.before.delivered_to(id).is_none() && turn.before.pour_sources_into(id).is_empty()
        })
    };
    let (container, needs_delivery) = match own {
        Some(c) => (c, false),
        None => match fresh() {
            Some(c) => (c, true),
            None => return Ok(()),
        },
    };

    let tool = delivery_tool(receiver_busy, turn.sender_busy());
    let drink = display_name(source.strip_prefix(BOTTLE_PREFIX).unwrap_or(&source));
    let mut plan = format!("pour {drink} into {}", display_name(container));
    if needs_delivery {
        plan = format!("{plan} and {}", delivery_phrase(tool, container, turn.sender));
    } else {
        plan = format!("{plan} for {}", turn.sender);
    }
    let explanation = if phrases.is_empty() {
        format!("Sure, I will {plan}.")
    } else {
        format!("{}, so I will {plan}.", phrases.join(" and "))
    };
    turn.speak(&explanation)?;
    let poured = turn.call(
        POUR_INTO,
        &[("source_container_name", &source), ("target_container_name", container)],
    )?;
    if !is_success(&poured) || !needs_delivery {
        return Ok(());
    }
    turn.call(tool, &[("object_name", container), ("person_name", turn.sender)])?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn intents() {
        assert!(matches!(parse_intent("Daniel, could you hand me the red glass?"), Some(Intent::HandMe(p)) if p == "the red glass"));
        assert!(matches!(parse_intent("Give me the_red_glass."), Some(Intent::HandMe(p)) if p == "the_red_glass"));
        assert!(matches!(parse_intent("Could you pour me some cola?"), Some(Intent::PourMe(p)) if p == "cola"));
        assert!(matches!(parse_intent("Could you give me the same, but without sugar?"), Some(Intent::SameWithoutSugar)));
        assert!(matches!(parse_intent("We have cola and fanta."), Some(Intent::DrinksAnswer(_))));
        assert!(parse_intent("Nice weather today.").is_none());
    }

    #[test]
    fn busy_memory_prefers_latest_statement() {
        let m = Memory {
            made: vec![
                Made {
                    name: IS_PERSON_BUSY_OR_IDLE.into(),
                    args: BTreeMap::new(),
                    result: "Daniel is busy.".into(),
                },
                Made {
                    name: CHECK_HINDERING_REASONS.into(),
                    args: BTreeMap::new(),
                    result: "Daniel is idle. Daniel can see x. Daniel can reach x.".into(),
                },
            ],
        };
        assert_eq!(m.busy("Daniel"), Some(false));
        assert_eq!(m.busy("Felix"), None);
    }
}
