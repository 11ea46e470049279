//! The tool API offered to the language model: schemas, argument handling,
//! dispatch onto scene queries and actions, and the chat-completions schema
//! document.
//!
//! Argument problems are reported back as ordinary tool results so the model
//! sees them, they never abort the interaction.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use serde_json::{json, Map, Value};
use thiserror::Error;

use crate::actions::{plan_and_execute, ActionOutcome, Composite};
use crate::num::Scalar;
use crate::scene::{Hindrance, SceneGraph, ROBOT_ID};

pub const GET_OBJECTS: &str = "get_objects";
pub const GET_PERSONS: &str = "get_persons";
pub const IS_PERSON_BUSY_OR_IDLE: &str = "is_person_busy_or_idle";
pub const CHECK_HINDERING_REASONS: &str = "check_hindering_reasons";
pub const CHECK_REACH_OBJECT_FOR_ROBOT: &str = "check_reach_object_for_robot";
pub const MOVE_OBJECT_TO_PERSON: &str = "move_object_to_person";
pub const HAND_OBJECT_OVER_TO_PERSON: &str = "hand_object_over_to_person";
pub const POUR_INTO: &str = "pour_into";
pub const SPEAK: &str = "speak";
pub const STOP: &str = "stop";

/// Addressee accepted by `speak` for talking to everyone.
pub const EVERYONE: &str = "All";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum SemanticType {
    #[serde(rename = "string")]
    Text,
    #[serde(rename = "person-ref")]
    PersonRef,
    #[serde(rename = "object-ref")]
    ObjectRef,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ToolKind {
    Query,
    Action,
    Expression,
    Control,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ParameterSchema {
    pub name: String,
    pub description: String,
    pub semantic_type: SemanticType,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ToolSchema {
    pub name: String,
    pub description: String,
    pub parameters: Vec<ParameterSchema>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ToolCall {
    pub call_id: String,
    pub name: String,
    pub arguments: BTreeMap<String, String>,
}

impl ToolCall {
    pub fn new<'a>(
        call_id: impl Into<String>,
        name: impl Into<String>,
        arguments: impl IntoIterator<Item = (&'a str, &'a str)>,
    ) -> Self {
        Self {
            call_id: call_id.into(),
            name: name.into(),
            arguments: arguments
                .into_iter()
                .map(|(k, v)| (k.to_string(), v.to_string()))
                .collect(),
        }
    }

    pub fn arg(&self, name: &str) -> Option<&str> {
        self.arguments.get(name).map(String::as_str)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ToolResult {
    pub call_id: String,
    pub content: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ToolError {
    #[error("schema document is malformed: {0}")]
    MalformedSchema(String),
    #[error("arguments for `{name}` are not a JSON object: {detail}")]
    MalformedArguments { name: String, detail: String },
}

pub fn kind_of(name: &str) -> Option<ToolKind> {
    Some(match name {
        GET_OBJECTS | GET_PERSONS | IS_PERSON_BUSY_OR_IDLE | CHECK_HINDERING_REASONS
        | CHECK_REACH_OBJECT_FOR_ROBOT => ToolKind::Query,
        MOVE_OBJECT_TO_PERSON | HAND_OBJECT_OVER_TO_PERSON | POUR_INTO => ToolKind::Action,
        SPEAK => ToolKind::Expression,
        STOP => ToolKind::Control,
        _ => return None,
    })
}

pub fn is_physical_action(name: &str) -> bool {
    kind_of(name) == Some(ToolKind::Action)
}

fn param(name: &str, semantic_type: SemanticType, description: &str) -> ParameterSchema {
    ParameterSchema {
        name: name.into(),
        description: description.into(),
        semantic_type,
    }
}

fn tool(name: &str, description: &str, parameters: Vec<ParameterSchema>) -> ToolSchema {
    ToolSchema {
        name: name.into(),
        description: description.into(),
        parameters,
    }
}

const PERSON_TO_CHECK: &str = "The name of the person to check. The person must be available in the scene.";
const OBJECT_TO_CHECK: &str = "The name of the object to check. The object must be available in the scene.";

/// The ten tools, in their canonical order.
pub fn registry() -> Vec<ToolSchema> {
    use SemanticType::*;
    vec![
        tool(
            GET_OBJECTS,
            "Get all objects that are available in the scene. You can see all these objects.",
            vec![],
        ),
        tool(
            GET_PERSONS,
            "Get all persons that are available in the scene. You can see all these persons.",
            vec![],
        ),
        tool(
            IS_PERSON_BUSY_OR_IDLE,
            "Check if the person is busy or idle. If the person is busy, it would be hindered from helping.",
            vec![param("person_name", PersonRef, PERSON_TO_CHECK)],
        ),
        tool(
            CHECK_HINDERING_REASONS,
            "Checks all hindering reasons for a person (busy or idle), and in combination with an object \
             (if person can see and reach object). If the person cannot see or cannot reach the object, \
             it would be hindered from helping with the object. If the person is busy, it would be \
             hindered from helping.",
            vec![
                param("person_name", PersonRef, PERSON_TO_CHECK),
                param("object_name", ObjectRef, OBJECT_TO_CHECK),
            ],
        ),
        tool(
            CHECK_REACH_OBJECT_FOR_ROBOT,
            "Check if the_robot can reach the object.",
            vec![param("object_name", ObjectRef, OBJECT_TO_CHECK)],
        ),
        tool(
            MOVE_OBJECT_TO_PERSON,
            "You move an object to a person.",
            vec![
                param(
                    "object_name",
                    ObjectRef,
                    "The name of the object to move. The object must be available in the scene.",
                ),
                param(
                    "person_name",
                    PersonRef,
                    "The name of the person to move the object to. The person must be available in the scene.",
                ),
            ],
        ),
        tool(
            HAND_OBJECT_OVER_TO_PERSON,
            "You hand an object over to a person.",
            vec![
                param(
                    "object_name",
                    ObjectRef,
                    "The name of the object to hand over. The object must be available in the scene.",
                ),
                param(
                    "person_name",
                    PersonRef,
                    "The name of the person to hand over the object to. The person must be available in the scene.",
                ),
            ],
        ),
        tool(
            POUR_INTO,
            "You pour from a source container into a target container.",
            vec![
                param("source_container_name", ObjectRef, "The name of the container to pour from."),
                param("target_container_name", ObjectRef, "The name of the container to pour into."),
            ],
        ),
        tool(
            SPEAK,
            "You speak out the given text.",
            vec![
                param(
                    "person_name",
                    PersonRef,
                    "The name of the person to speak to. The person must be available in the scene. \
                     Give All if you want to speak to everyone.",
                ),
                param("text", Text, "The text to speak."),
            ],
        ),
        tool(STOP, "You need to call this function when you are finished.", vec![]),
    ]
}

// ---------------------------------------------------------------------------
// Chat-completions schema document
// ---------------------------------------------------------------------------

const SEMANTIC_TYPE_KEY: &str = "x-semantic-type";

/// Renders the registry in the chat-completions `tools` format. Every
/// parameter is a required string; the semantic type rides along in an
/// extension key so the document converts back losslessly.
pub fn serialize_schemas(registry: &[ToolSchema]) -> Value {
    Value::Array(
        registry
            .iter()
            .map(|t| {
                let mut properties = Map::new();
                for p in &t.parameters {
                    properties.insert(
                        p.name.clone(),
                        json!({
                            "type": "string",
                            "description": p.description,
                            SEMANTIC_TYPE_KEY: p.semantic_type,
                        }),
                    );
                }
                let required: Vec<&str> = t.parameters.iter().map(|p| p.name.as_str()).collect();
                json!({
                    "type": "function",
                    "function": {
                        "name": t.name,
                        "description": t.description,
                        "parameters": {
                            "type": "object",
                            "properties": properties,
                            "required": required,
                        },
                    },
                })
            })
            .collect(),
    )
}

pub fn deserialize_schemas(document: &Value) -> Result<Vec<ToolSchema>, ToolError> {
    let bad = |what: &str| ToolError::MalformedSchema(what.to_string());
    let entries = document.as_array().ok_or_else(|| bad("expected an array of tools"))?;
    entries
        .iter()
        .map(|entry| {
            let function = entry.get("function").ok_or_else(|| bad("missing `function`"))?;
            let text = |v: Option<&Value>, what: &str| {
                v.and_then(Value::as_str)
                    .map(str::to_string)
                    .ok_or_else(|| bad(what))
            };
            let name = text(function.get("name"), "missing tool name")?;
            let description = text(function.get("description"), "missing tool description")?;
            let properties = function
                .pointer("/parameters/properties")
                .and_then(Value::as_object)
                .ok_or_else(|| bad("missing parameter properties"))?;
            let parameters = properties
                .iter()
                .map(|(pname, spec)| {
                    let semantic_type = spec
                        .get(SEMANTIC_TYPE_KEY)
                        .cloned()
                        .map(serde_json::from_value)
                        .transpose()
                        .map_err(|e| bad(&e.to_string()))?
                        .unwrap_or(SemanticType::Text);
                    Ok(ParameterSchema {
                        name: pname.clone(),
                        description: text(spec.get("description"), "missing parameter description")?,
                        semantic_type,
                    })
                })
                .collect::<Result<_, ToolError>>()?;
            Ok(ToolSchema {
                name,
                description,
                parameters,
            })
        })
        .collect()
}

/// Builds a [`ToolCall`] from a backend's `(id, name, arguments-json)` triple.
/// Non-string argument values are kept in their JSON rendering.
pub fn parse_tool_call(call_id: &str, name: &str, arguments_json: &str) -> Result<ToolCall, ToolError> {
    let malformed = |detail: String| ToolError::MalformedArguments {
        name: name.to_string(),
        detail,
    };
    let trimmed = arguments_json.trim();
    let value: Value = if trimmed.is_empty() {
        Value::Object(Map::new())
    } else {
        serde_json::from_str(trimmed).map_err(|e| malformed(e.to_string()))?
    };
    let object = value
        .as_object()
        .ok_or_else(|| malformed("not an object".into()))?;
    Ok(ToolCall {
        call_id: call_id.to_string(),
        name: name.to_string(),
        arguments: object
            .iter()
            .map(|(k, v)| {
                let s = match v {
                    Value::String(s) => s.clone(),
                    other => other.to_string(),
                };
                (k.clone(), s)
            })
            .collect(),
    })
}

// ---------------------------------------------------------------------------
// Dispatch
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "effect", rename_all = "snake_case")]
#[serde(bound(serialize = "T: Scalar", deserialize = "T: Scalar"))]
pub enum DispatchEffect<T> {
    /// A query was answered or the call was rejected; the scene is unchanged.
    None,
    Spoke { person: String, text: String },
    Acted { outcome: ActionOutcome<T> },
}

#[derive(Debug, Clone, PartialEq)]
pub struct Dispatched<T> {
    pub result: ToolResult,
    pub effect: DispatchEffect<T>,
}

struct Rejection(String);

fn no_object(name: &str) -> Rejection {
    Rejection(format!("There is no object named {name} in the scene."))
}

fn no_person(name: &str) -> Rejection {
    Rejection(format!("There is no person named {name} in the scene."))
}

fn required<'a>(call: &'a ToolCall, name: &str) -> Result<&'a str, Rejection> {
    call.arg(name)
        .ok_or_else(|| Rejection(format!("Missing argument {name} for {}.", call.name)))
}

fn object_arg<'a, T: Scalar>(scene: &SceneGraph<T>, call: &'a ToolCall, name: &str) -> Result<&'a str, Rejection> {
    let v = required(call, name)?;
    if scene.has_object(v) {
        Ok(v)
    } else {
        Err(no_object(v))
    }
}

fn person_arg<'a, T: Scalar>(scene: &SceneGraph<T>, call: &'a ToolCall, name: &str) -> Result<&'a str, Rejection> {
    let v = required(call, name)?;
    if scene.has_person(v) {
        Ok(v)
    } else {
        Err(no_person(v))
    }
}

fn listing(kind: &str, ids: &[String]) -> String {
    if ids.is_empty() {
        format!("There are no {kind} in the scene.")
    } else {
        let label = format!("{}{}", kind[..1].to_uppercase(), &kind[1..]);
        format!("{label} in the scene: {}.", ids.join(", "))
    }
}

/// Executes one tool call against the scene. `stop` belongs to the
/// interaction loop and is rejected here.
pub fn dispatch<T: Scalar>(scene: &mut SceneGraph<T>, call: &ToolCall) -> Dispatched<T> {
    let (content, effect) = match dispatch_inner(scene, call) {
        Ok(pair) => pair,
        Err(Rejection(text)) => (text, DispatchEffect::None),
    };
    Dispatched {
        result: ToolResult {
            call_id: call.call_id.clone(),
            content,
        },
        effect,
    }
}

fn dispatch_inner<T: Scalar>(
    scene: &mut SceneGraph<T>,
    call: &ToolCall,
) -> Result<(String, DispatchEffect<T>), Rejection> {
    let answer = |text: String| Ok((text, DispatchEffect::None));
    match call.name.as_str() {
        GET_OBJECTS => answer(listing("objects", &scene.list_objects())),
        GET_PERSONS => answer(listing("persons", &scene.list_persons())),
        IS_PERSON_BUSY_OR_IDLE => {
            let person = person_arg(scene, call, "person_name")?;
            answer(busy_sentence(person, scene.is_busy(person).unwrap_or(false)))
        }
        CHECK_HINDERING_REASONS => {
            let person = person_arg(scene, call, "person_name")?;
            let object = object_arg(scene, call, "object_name")?;
            let reasons = scene.hindering_reasons(person, object).unwrap_or_default();
            let see = if reasons.contains(&Hindrance::CannotSee) { "cannot see" } else { "can see" };
            let reach = if reasons.contains(&Hindrance::CannotReach) { "cannot reach" } else { "can reach" };
            answer(format!(
                "{} {person} {see} {object}. {person} {reach} {object}.",
                busy_sentence(person, reasons.contains(&Hindrance::Busy))
            ))
        }
        CHECK_REACH_OBJECT_FOR_ROBOT => {
            let object = object_arg(scene, call, "object_name")?;
            let can = if scene.is_reachable(ROBOT_ID, object).unwrap_or(false) { "can" } else { "cannot" };
            answer(format!("{ROBOT_ID} {can} reach {object}."))
        }
        MOVE_OBJECT_TO_PERSON | HAND_OBJECT_OVER_TO_PERSON => {
            let object = object_arg(scene, call, "object_name")?.to_string();
            let person = person_arg(scene, call, "person_name")?.to_string();
            let (composite, done) = if call.name == MOVE_OBJECT_TO_PERSON {
                (
                    Composite::MoveObjectToPerson { object: object.clone(), person: person.clone() },
                    format!("{ROBOT_ID} moved {object} to {person}."),
                )
            } else {
                (
                    Composite::HandObjectOverToPerson { object: object.clone(), person: person.clone() },
                    format!("{ROBOT_ID} handed {object} over to {person}."),
                )
            };
            Ok(act(scene, &composite, done))
        }
        POUR_INTO => {
            let source = object_arg(scene, call, "source_container_name")?.to_string();
            let target = object_arg(scene, call, "target_container_name")?.to_string();
            let substance = scene
                .object(&source)
                .ok()
                .and_then(|o| o.fill_contents.clone())
                .unwrap_or_else(|| "nothing".into());
            let done = format!("{ROBOT_ID} poured {substance} from {source} into {target}.");
            Ok(act(scene, &Composite::PourInto { source, target }, done))
        }
        SPEAK => {
            let person = required(call, "person_name")?;
            if person != EVERYONE && !scene.has_person(person) {
                return Err(no_person(person));
            }
            let text = required(call, "text")?;
            if text.trim().is_empty() {
                return Err(Rejection("Nothing was said: the text is empty.".into()));
            }
            Ok((
                format!("You said to {person}: {text}"),
                DispatchEffect::Spoke {
                    person: person.to_string(),
                    text: text.to_string(),
                },
            ))
        }
        STOP => Err(Rejection("The stop function ends the interaction and is not executed as a tool.".into())),
        other => Err(Rejection(format!("Unknown function {other}."))),
    }
}

fn busy_sentence(person: &str, busy: bool) -> String {
    format!("{person} is {}.", if busy { "busy" } else { "idle" })
}

fn act<T: Scalar>(scene: &mut SceneGraph<T>, composite: &Composite, done: String) -> (String, DispatchEffect<T>) {
    let outcome = plan_and_execute(scene, composite);
    let text = match &outcome {
        ActionOutcome::Success { .. } => done,
        ActionOutcome::Failure { failure_text } => failure_text.clone(),
    };
    (text, DispatchEffect::Acted { outcome })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn registry_order_and_size() {
        let names: Vec<_> = registry().into_iter().map(|t| t.name).collect();
        assert_eq!(
            names,
            [
                GET_OBJECTS,
                GET_PERSONS,
                IS_PERSON_BUSY_OR_IDLE,
                CHECK_HINDERING_REASONS,
                CHECK_REACH_OBJECT_FOR_ROBOT,
                MOVE_OBJECT_TO_PERSON,
                HAND_OBJECT_OVER_TO_PERSON,
                POUR_INTO,
                SPEAK,
                STOP
            ]
        );
    }

    #[test]
    fn stop_is_last() {
        let reg = registry();
        let last = reg.last().unwrap();
        assert_eq!(last.name, "stop");
        assert_eq!(last.description, "You need to call this function when you are finished.");
    }

    #[test]
    fn speak_parameters() {
        let reg = registry();
        let speak = reg.iter().find(|t| t.name == SPEAK).unwrap();
        let names: Vec<_> = speak.parameters.iter().map(|p| p.name.as_str()).collect();
        assert_eq!(names, ["person_name", "text"]);
        assert!(speak.parameters[0]
            .description
            .ends_with("Give All if you want to speak to everyone."));
    }

    #[test]
    fn pour_into_required_parameters() {
        let doc = serialize_schemas(&registry());
        let pour = doc
            .as_array()
            .unwrap()
            .iter()
            .find(|t| t["function"]["name"] == POUR_INTO)
            .unwrap();
        assert_eq!(
            pour["function"]["parameters"]["required"],
            json!(["source_container_name", "target_container_name"])
        );
    }

    #[test]
    fn empty_parameter_tools_serialize_empty() {
        let doc = serialize_schemas(&registry());
        let get = &doc[0]["function"]["parameters"];
        assert_eq!(get["properties"], json!({}));
        assert_eq!(get["required"], json!([]));
    }

    #[test]
    fn tool_call_from_backend_payload() {
        let call = parse_tool_call("c1", SPEAK, r#"{"person_name": "All", "text": "Hi"}"#).unwrap();
        assert_eq!(call.arg("person_name"), Some("All"));
        assert_eq!(parse_tool_call("c2", GET_OBJECTS, "").unwrap().arguments.len(), 0);
        assert!(parse_tool_call("c3", SPEAK, "[1,2]").is_err());
        let numeric = parse_tool_call("c4", SPEAK, r#"{"text": 3}"#).unwrap();
        assert_eq!(numeric.arg("text"), Some("3"));
    }
}
