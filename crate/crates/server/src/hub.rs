//! Session registry and per-session event log, independent of the transport.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::{Arc, Condvar, Mutex, MutexGuard};

use attentive_core::agent::{AgentConfig, ChatBackend, Session, TraceEvent};
use attentive_core::evalsuite::BUILTIN_SCENES;
use attentive_core::{Scene, SceneChange, SceneDocument};
use serde::Serialize;
use thiserror::Error;
use tokio::sync::watch;

use crate::protocol::{Ack, Body, Control, ErrorPayload, Snapshot, TraceEventPayload, Utterance, WireMessage};

pub const IN_PROGRESS: &str = "interaction in progress";

#[derive(Debug, Error)]
pub enum HubError {
    #[error("unknown scene fixture `{0}`")]
    UnknownFixture(String),
    #[error("scene fixture `{name}` is invalid: {detail}")]
    BadFixture { name: String, detail: String },
    #[error("invalid agent configuration: {0}")]
    Config(String),
    #[error("cannot read scene directory {path}: {source}")]
    SceneDir { path: PathBuf, source: std::io::Error },
}

/// Named scene documents: the built-in ones plus any `<name>.scene.json`
/// found in an extra directory (which take precedence).
#[derive(Debug, Clone, Default)]
pub struct Fixtures {
    scenes: BTreeMap<String, String>,
}

impl Fixtures {
    pub fn builtin() -> Self {
        Self {
            scenes: BUILTIN_SCENES.iter().map(|(n, t)| (n.to_string(), t.to_string())).collect(),
        }
    }

    pub fn with_dir(mut self, dir: &Path) -> Result<Self, HubError> {
        let err = |source| HubError::SceneDir {
            path: dir.to_path_buf(),
            source,
        };
        for entry in std::fs::read_dir(dir).map_err(err)? {
            let path = entry.map_err(err)?.path();
            let Some(name) = path.file_name().and_then(|n| n.to_str()) else { continue };
            if let Some(stem) = name.strip_suffix(".scene.json") {
                let text = std::fs::read_to_string(&path).map_err(err)?;
                self.scenes.insert(stem.to_string(), text);
            }
        }
        Ok(self)
    }

    pub fn names(&self) -> Vec<String> {
        self.scenes.keys().cloned().collect()
    }

    pub fn load(&self, name: &str) -> Result<SceneDocument, HubError> {
        let text = self.scenes.get(name).ok_or_else(|| HubError::UnknownFixture(name.into()))?;
        let scene = Scene::load(text).map_err(|e| HubError::BadFixture {
            name: name.into(),
            detail: e.to_string(),
        })?;
        Ok(scene.to_document())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SessionInfo {
    pub id: String,
    pub fixture: String,
    pub busy: bool,
    pub revision: u64,
    pub last_seq: u64,
}

struct State {
    /// `None` while an interaction runs on its own thread.
    agent: Option<Session>,
    log: Vec<WireMessage>,
    interactions: u32,
    /// Added to the scene revision so that resets never move it backwards.
    revision_base: u64,
    last_snapshot_revision: u64,
}

impl State {
    fn publish(&mut self, body: Body, notify: &watch::Sender<u64>) -> WireMessage {
        let message = WireMessage::new(self.log.len() as u64 + 1, body);
        self.log.push(message.clone());
        notify.send_replace(message.seq);
        message
    }

    fn snapshot(&mut self, scene: &Scene, notify: &watch::Sender<u64>) -> WireMessage {
        let revision = self.revision_base + scene.revision();
        self.last_snapshot_revision = revision;
        self.publish(Body::SceneSnapshot(Snapshot::of(scene, revision)), notify)
    }
}

/// One live session: the agent, its scene and the ordered message log.
pub struct LiveSession {
    id: String,
    fixture: String,
    initial: SceneDocument,
    state: Mutex<State>,
    idle: Condvar,
    notify: watch::Sender<u64>,
}

impl LiveSession {
    pub fn id(&self) -> &str {
        &self.id
    }

    fn lock(&self) -> MutexGuard<'_, State> {
        self.state.lock().expect("session state lock")
    }

    pub fn info(&self) -> SessionInfo {
        let s = self.lock();
        SessionInfo {
            id: self.id.clone(),
            fixture: self.fixture.clone(),
            busy: s.agent.is_none(),
            revision: s.last_snapshot_revision,
            last_seq: s.log.len() as u64,
        }
    }

    /// Server messages with `seq > since`, in order.
    pub fn events_since(&self, since: u64) -> Vec<WireMessage> {
        let s = self.lock();
        s.log.iter().skip(since.min(s.log.len() as u64) as usize).cloned().collect()
    }

    pub fn last_seq(&self) -> u64 {
        self.lock().log.len() as u64
    }

    /// The most recent snapshot in the log.
    pub fn snapshot(&self) -> Snapshot {
        let s = self.lock();
        s.log
            .iter()
            .rev()
            .find_map(|m| match &m.body {
                Body::SceneSnapshot(snap) => Some(snap.clone()),
                _ => None,
            })
            .expect("sessions start with a snapshot")
    }

    /// Wakes up whenever a message is appended.
    pub fn subscribe(&self) -> watch::Receiver<u64> {
        self.notify.subscribe()
    }

    pub fn is_busy(&self) -> bool {
        self.lock().agent.is_none()
    }

    /// Blocks until no interaction is running.
    pub fn wait_idle(&self) {
        let mut s = self.lock();
        while s.agent.is_none() {
            s = self.idle.wait(s).expect("session state lock");
        }
    }

    /// Handles one client frame. The reply (ack or error) is appended to the
    /// log and also returned; utterances run in the background afterwards.
    pub fn handle_text(self: &Arc<Self>, text: &str) -> WireMessage {
        match WireMessage::parse(text) {
            Ok(message) => self.handle(message),
            Err(e) => self.reply_error(None, format!("malformed message: {e}")),
        }
    }

    pub fn handle(self: &Arc<Self>, message: WireMessage) -> WireMessage {
        let seq = message.seq;
        match message.body {
            Body::UtteranceSubmit(u) => self.submit(seq, u),
            Body::Control(c) => self.control(seq, c),
            other => self.reply_error(
                Some(seq),
                format!("clients may send utterance_submit or control, not {}", other.type_name()),
            ),
        }
    }

    fn reply_error(&self, in_reply_to: Option<u64>, message: String) -> WireMessage {
        self.lock()
            .publish(Body::Error(ErrorPayload { in_reply_to, message }), &self.notify)
    }

    fn submit(self: &Arc<Self>, seq: u64, u: Utterance) -> WireMessage {
        let mut s = self.lock();
        let Some(mut agent) = s.agent.take() else {
            return s.publish(
                Body::Error(ErrorPayload {
                    in_reply_to: Some(seq),
                    message: IN_PROGRESS.into(),
                }),
                &self.notify,
            );
        };
        if let Err(e) = attentive_core::agent::format_utterance(&u.speaker, &u.listener, &u.text) {
            s.agent = Some(agent);
            return s.publish(
                Body::Error(ErrorPayload {
                    in_reply_to: Some(seq),
                    message: e.to_string(),
                }),
                &self.notify,
            );
        }
        s.interactions += 1;
        let interaction = s.interactions;
        let ack = s.publish(
            Body::Ack(Ack {
                in_reply_to: seq,
                detail: format!("interaction {interaction} started"),
            }),
            &self.notify,
        );
        drop(s);

        let me = Arc::clone(self);
        std::thread::spawn(move || {
            let mut index = 0;
            let mut observer = |event: &TraceEvent, scene: &Scene| {
                let mut s = me.lock();
                s.publish(Body::TraceEvent(TraceEventPayload::new(interaction, index, event)), &me.notify);
                index += 1;
                if s.revision_base + scene.revision() != s.last_snapshot_revision {
                    s.snapshot(scene, &me.notify);
                }
            };
            let result = agent.run_interaction_observed(&u.speaker, &u.listener, &u.text, &mut observer);
            let mut s = me.lock();
            if let Err(e) = result {
                s.publish(
                    Body::Error(ErrorPayload {
                        in_reply_to: Some(seq),
                        message: e.to_string(),
                    }),
                    &me.notify,
                );
            }
            s.agent = Some(agent);
            drop(s);
            me.idle.notify_all();
        });
        ack
    }

    fn control(&self, seq: u64, c: Control) -> WireMessage {
        let mut s = self.lock();
        let Some(mut agent) = s.agent.take() else {
            return s.publish(
                Body::Error(ErrorPayload {
                    in_reply_to: Some(seq),
                    message: IN_PROGRESS.into(),
                }),
                &self.notify,
            );
        };
        let change = match &c {
            Control::MoveObject { object, center } => Some(SceneChange::MoveObject {
                object: object.clone(),
                center: *center,
            }),
            Control::Attach { person, object } => Some(SceneChange::Attach {
                agent: person.clone(),
                object: object.clone(),
            }),
            Control::Detach { person, object } => Some(SceneChange::Detach {
                agent: person.clone(),
                object: object.clone(),
            }),
            Control::ResetScene => None,
        };
        let outcome = match change {
            Some(change) => agent.scene.mutate(&change).map_err(|e| e.to_string()),
            None => {
                let fresh = Scene::from_document(self.initial.clone()).expect("fixture validated at creation");
                s.revision_base = s.last_snapshot_revision + 1;
                agent.scene = fresh;
                Ok(())
            }
        };
        let reply = match outcome {
            Ok(()) => {
                let ack = s.publish(
                    Body::Ack(Ack {
                        in_reply_to: seq,
                        detail: "applied".into(),
                    }),
                    &self.notify,
                );
                s.snapshot(&agent.scene, &self.notify);
                ack
            }
            Err(message) => s.publish(
                Body::Error(ErrorPayload {
                    in_reply_to: Some(seq),
                    message,
                }),
                &self.notify,
            ),
        };
        s.agent = Some(agent);
        reply
    }
}

/// All sessions of one server.
pub struct Hub {
    fixtures: Fixtures,
    sessions: Mutex<BTreeMap<String, Arc<LiveSession>>>,
    counter: AtomicU64,
}

impl Hub {
    pub fn new(fixtures: Fixtures) -> Self {
        Self {
            fixtures,
            sessions: Mutex::new(BTreeMap::new()),
            counter: AtomicU64::new(0),
        }
    }

    pub fn fixtures(&self) -> &Fixtures {
        &self.fixtures
    }

    pub fn create(&self, fixture: &str, config: AgentConfig) -> Result<Arc<LiveSession>, HubError> {
        let backend = config.make_backend().map_err(|e| HubError::Config(e.to_string()))?;
        self.create_with_backend(fixture, config, backend)
    }

    /// Like [`Hub::create`] but with a caller-supplied backend.
    pub fn create_with_backend(
        &self,
        fixture: &str,
        config: AgentConfig,
        backend: Arc<dyn ChatBackend>,
    ) -> Result<Arc<LiveSession>, HubError> {
        let initial = self.fixtures.load(fixture)?;
        let scene = Scene::from_document(initial.clone()).map_err(|e| HubError::BadFixture {
            name: fixture.into(),
            detail: e.to_string(),
        })?;
        let agent = Session::new(scene, config, backend).map_err(|e| HubError::Config(e.to_string()))?;
        let n = self.counter.fetch_add(1, Ordering::Relaxed) + 1;
        let (notify, _) = watch::channel(0);
        let mut state = State {
            agent: None,
            log: Vec::new(),
            interactions: 0,
            revision_base: 0,
            last_snapshot_revision: 0,
        };
        state.snapshot(&agent.scene, &notify);
        state.agent = Some(agent);
        let session = Arc::new(LiveSession {
            id: format!("s{n}"),
            fixture: fixture.into(),
            initial,
            state: Mutex::new(state),
            idle: Condvar::new(),
            notify,
        });
        self.sessions
            .lock()
            .expect("session map lock")
            .insert(session.id.clone(), Arc::clone(&session));
        Ok(session)
    }

    pub fn get(&self, id: &str) -> Option<Arc<LiveSession>> {
        self.sessions.lock().expect("session map lock").get(id).cloned()
    }

    pub fn list(&self) -> Vec<SessionInfo> {
        let sessions: Vec<Arc<LiveSession>> = self.sessions.lock().expect("session map lock").values().cloned().collect();
        sessions.iter().map(|s| s.info()).collect()
    }

    pub fn remove(&self, id: &str) -> bool {
        self.sessions.lock().expect("session map lock").remove(id).is_some()
    }
}
