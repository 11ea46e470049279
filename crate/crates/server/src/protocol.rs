//! Wire messages. One JSON object per websocket text frame:
//! `{"type": ..., "seq": n, "payload": {...}}`. See `PROTOCOL.md`.

use std::collections::BTreeMap;

use attentive_core::agent::TraceEvent;
use attentive_core::scene::Affordance;
use attentive_core::{Scene, Vec3};
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WireMessage {
    /// Server messages: position in the session log, starting at 1.
    /// Client messages: any number the client picks; echoed in the reply.
    #[serde(default)]
    pub seq: u64,
    #[serde(flatten)]
    pub body: Body,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", content = "payload", rename_all = "snake_case")]
pub enum Body {
    SceneSnapshot(Snapshot),
    UtteranceSubmit(Utterance),
    TraceEvent(TraceEventPayload),
    Control(Control),
    Ack(Ack),
    Error(ErrorPayload),
}

impl Body {
    pub fn type_name(&self) -> &'static str {
        match self {
            Self::SceneSnapshot(_) => "scene_snapshot",
            Self::UtteranceSubmit(_) => "utterance_submit",
            Self::TraceEvent(_) => "trace_event",
            Self::Control(_) => "control",
            Self::Ack(_) => "ack",
            Self::Error(_) => "error",
        }
    }
}

impl WireMessage {
    pub fn new(seq: u64, body: Body) -> Self {
        Self { seq, body }
    }

    pub fn to_text(&self) -> String {
        serde_json::to_string(self).expect("wire messages serialize")
    }

    pub fn parse(text: &str) -> Result<Self, serde_json::Error> {
        serde_json::from_str(text)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Utterance {
    pub speaker: String,
    pub listener: String,
    pub text: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "command", rename_all = "snake_case", deny_unknown_fields)]
pub enum Control {
    MoveObject { object: String, center: Vec3 },
    Attach { person: String, object: String },
    Detach { person: String, object: String },
    ResetScene,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Ack {
    pub in_reply_to: u64,
    pub detail: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ErrorPayload {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub in_reply_to: Option<u64>,
    pub message: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceEventPayload {
    /// 1-based interaction counter within the session.
    pub interaction: u32,
    /// 0-based position of the event within the interaction's trace.
    pub index: u32,
    pub kind: String,
    pub text: String,
    pub terminal: bool,
    pub event: TraceEvent,
}

impl TraceEventPayload {
    pub fn new(interaction: u32, index: u32, event: &TraceEvent) -> Self {
        Self {
            interaction,
            index,
            kind: event.kind().into(),
            text: event.render(),
            terminal: event.is_termination(),
            event: event.clone(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SnapshotObject {
    pub id: String,
    pub center: Vec3,
    pub half_extents: Vec3,
    pub affordances: Vec<Affordance>,
    pub contents: Option<String>,
    pub history: Vec<String>,
    pub held_by: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SnapshotPerson {
    pub id: String,
    pub eye: Vec3,
    pub gaze: Vec3,
    pub reach_origin: Vec3,
    pub reach_radius: f64,
    pub holding: Vec<String>,
    pub busy: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SnapshotRobot {
    pub id: String,
    pub reach_origin: Vec3,
    pub reach_radius: f64,
    pub holding: Vec<String>,
    pub attention: Option<String>,
}

/// Full scene state plus every derived flag a client needs to draw it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Snapshot {
    /// Never decreases within a session, including across resets.
    pub revision: u64,
    pub objects: Vec<SnapshotObject>,
    pub persons: Vec<SnapshotPerson>,
    pub robot: SnapshotRobot,
    /// person -> object -> visible
    pub visibility: BTreeMap<String, BTreeMap<String, bool>>,
    /// person or robot -> object -> reachable
    pub reachability: BTreeMap<String, BTreeMap<String, bool>>,
}

impl Snapshot {
    pub fn of(scene: &Scene, revision: u64) -> Self {
        let objects = scene
            .objects()
            .map(|o| SnapshotObject {
                id: o.id.clone(),
                center: o.volume.center,
                half_extents: o.volume.half_extents,
                affordances: o.affordances.iter().copied().collect(),
                contents: o.fill_contents.clone(),
                history: o.fill_history.clone(),
                held_by: o.held_by.clone(),
            })
            .collect();
        let persons = scene
            .persons()
            .map(|p| SnapshotPerson {
                id: p.id.clone(),
                eye: p.eye_position,
                gaze: p.gaze_direction,
                reach_origin: p.reach_origin,
                reach_radius: p.reach_radius,
                holding: p.held_object_ids.clone(),
                busy: scene.is_busy(&p.id).unwrap_or(false),
            })
            .collect();
        let r = scene.robot();
        let robot = SnapshotRobot {
            id: r.id.clone(),
            reach_origin: r.reach_origin,
            reach_radius: r.reach_radius,
            holding: r.held_object_ids.clone(),
            attention: r.attention.clone(),
        };
        let ids = scene.list_objects();
        let matrix = |agent: &str, f: &dyn Fn(&str, &str) -> bool| -> BTreeMap<String, bool> {
            ids.iter().map(|o| (o.clone(), f(agent, o))).collect()
        };
        let mut visibility = BTreeMap::new();
        let mut reachability = BTreeMap::new();
        for p in scene.list_persons() {
            visibility.insert(p.clone(), matrix(&p, &|a, o| scene.is_visible(a, o).unwrap_or(false)));
            reachability.insert(p.clone(), matrix(&p, &|a, o| scene.is_reachable(a, o).unwrap_or(false)));
        }
        reachability.insert(r.id.clone(), matrix(&r.id, &|a, o| scene.is_reachable(a, o).unwrap_or(false)));
        Self {
            revision,
            objects,
            persons,
            robot,
            visibility,
            reachability,
        }
    }

    pub fn object(&self, id: &str) -> Option<&SnapshotObject> {
        self.objects.iter().find(|o| o.id == id)
    }

    pub fn person(&self, id: &str) -> Option<&SnapshotPerson> {
        self.persons.iter().find(|p| p.id == id)
    }
}
