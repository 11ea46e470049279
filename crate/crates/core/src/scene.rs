//! The scene graph: objects, persons and the robot, plus the visibility,
//! reachability and busyness queries that ground the agent.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geometry::{BoundingVolume, Vec3};
use crate::num::Scalar;

pub const ROBOT_ID: &str = "the_robot";

pub const DEFAULT_PERSON_REACH: f64 = 0.80;
pub const DEFAULT_ROBOT_REACH: f64 = 1.00;

const GAZE_NORM_TOLERANCE: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum SceneError {
    #[error("malformed scene document: {0}")]
    Parse(String),
    #[error("duplicate id `{0}`")]
    DuplicateId(String),
    #[error("invalid id `{0}`")]
    InvalidId(String),
    #[error("`{entity}` references `{reference}`, which does not exist")]
    DanglingReference { entity: String, reference: String },
    #[error("gaze direction of `{0}` is not a unit vector")]
    NonUnitGaze(String),
    #[error("`{0}` has non-finite or non-positive geometry")]
    BadGeometry(String),
    #[error("no person named `{0}`")]
    UnknownPerson(String),
    #[error("no object named `{0}`")]
    UnknownObject(String),
    #[error("no agent named `{0}`")]
    UnknownAgent(String),
    #[error("`{object}` is already held by `{holder}`")]
    AlreadyHeld { object: String, holder: String },
    #[error("`{agent}` does not hold `{object}`")]
    NotHeld { agent: String, object: String },
    #[error("`{0}` cannot hold more objects")]
    HandsFull(String),
    #[error("`{0}` cannot be grasped")]
    NotGraspable(String),
    #[error("`{0}` has nothing to pour")]
    NotPourable(String),
    #[error("`{0}` is not a container")]
    NotContainer(String),
    #[error("`{target}` already contains {existing}")]
    ContentsConflict { target: String, existing: String },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Affordance {
    Container,
    Pourable,
    Graspable,
    BusyMarker,
    Occluder,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound(serialize = "T: Scalar", deserialize = "T: Scalar"))]
pub struct ObjectEntity<T> {
    pub id: String,
    pub volume: BoundingVolume<T>,
    pub affordances: BTreeSet<Affordance>,
    /// Substance currently inside, for containers and bottles.
    pub fill_contents: Option<String>,
    /// Every substance ever poured into this container, oldest first.
    pub fill_history: Vec<String>,
    pub held_by: Option<String>,
}

impl<T: Scalar> ObjectEntity<T> {
    pub fn has(&self, affordance: Affordance) -> bool {
        self.affordances.contains(&affordance)
    }

    pub fn center(&self) -> Vec3<T> {
        self.volume.center
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound(serialize = "T: Scalar", deserialize = "T: Scalar"))]
pub struct PersonEntity<T> {
    pub id: String,
    pub eye_position: Vec3<T>,
    pub gaze_direction: Vec3<T>,
    pub reach_origin: Vec3<T>,
    pub reach_radius: T,
    pub held_object_ids: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound(serialize = "T: Scalar", deserialize = "T: Scalar"))]
pub struct RobotEntity<T> {
    pub id: String,
    pub reach_origin: Vec3<T>,
    pub reach_radius: T,
    pub held_object_ids: Vec<String>,
    /// Last gaze target; an annotation only.
    pub attention: Option<String>,
}

impl<T: Scalar> RobotEntity<T> {
    pub const MAX_HELD: usize = 2;
}

/// Something that can reach for objects.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AgentRef<'a> {
    Robot,
    Person(&'a str),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Hindrance {
    Busy,
    CannotSee,
    CannotReach,
}

pub type HinderingReasons = BTreeSet<Hindrance>;

/// A single state change. Every applied change advances the revision by one.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "change", rename_all = "snake_case")]
#[serde(bound(serialize = "T: Scalar", deserialize = "T: Scalar"))]
pub enum SceneChange<T> {
    MoveObject { object: String, center: Vec3<T> },
    Attach { agent: String, object: String },
    Detach { agent: String, object: String },
    /// Release a held object at a new location.
    Place { agent: String, object: String, center: Vec3<T> },
    /// Pass a held object from one agent into a person's hand.
    Handover { from: String, to: String, object: String },
    Fill { source: String, target: String },
    /// Move a source held by the robot to `at` and pour it into `target`.
    Pour { source: String, target: String, at: Vec3<T> },
    Gaze { target: String },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound(serialize = "T: Scalar", deserialize = "T: Scalar"))]
pub struct SceneGraph<T> {
    objects: BTreeMap<String, ObjectEntity<T>>,
    persons: BTreeMap<String, PersonEntity<T>>,
    robot: RobotEntity<T>,
    revision: u64,
}

// ---------------------------------------------------------------------------
// Scene-definition document
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
#[serde(bound(serialize = "T: Scalar", deserialize = "T: Scalar"))]
pub struct SceneDocument<T> {
    #[serde(default)]
    pub objects: Vec<ObjectSpec<T>>,
    #[serde(default)]
    pub persons: Vec<PersonSpec<T>>,
    #[serde(default)]
    pub robot: Option<RobotSpec<T>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
#[serde(bound(serialize = "T: Scalar", deserialize = "T: Scalar"))]
pub struct ObjectSpec<T> {
    pub id: String,
    pub center: Vec3<T>,
    pub half_extents: Vec3<T>,
    #[serde(default)]
    pub affordances: Vec<Affordance>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub contents: Option<String>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub history: Vec<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub held_by: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
#[serde(bound(serialize = "T: Scalar", deserialize = "T: Scalar"))]
pub struct PersonSpec<T> {
    pub id: String,
    pub eye: Vec3<T>,
    pub gaze: Vec3<T>,
    pub reach_origin: Vec3<T>,
    #[serde(default = "default_person_reach")]
    pub reach_radius: T,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
#[serde(bound(serialize = "T: Scalar", deserialize = "T: Scalar"))]
pub struct RobotSpec<T> {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub id: Option<String>,
    pub reach_origin: Vec3<T>,
    #[serde(default = "default_robot_reach")]
    pub reach_radius: T,
}

fn default_person_reach<T: Scalar>() -> T {
    T::lit(DEFAULT_PERSON_REACH)
}

fn default_robot_reach<T: Scalar>() -> T {
    T::lit(DEFAULT_ROBOT_REACH)
}

impl<T: Scalar> Default for RobotSpec<T> {
    fn default() -> Self {
        Self {
            id: None,
            reach_origin: Vec3::from_f64(0.0, 0.45, 0.3),
            reach_radius: default_robot_reach(),
        }
    }
}

pub fn is_canonical_object_id(id: &str) -> bool {
    !id.is_empty()
        && id
            .bytes()
            .all(|b| b.is_ascii_lowercase() || b.is_ascii_digit() || b == b'_')
}

fn is_valid_person_id(id: &str) -> bool {
    !id.is_empty() && id.chars().all(|c| c.is_alphanumeric() || c == '_' || c == '-')
}

/// Maps free text such as `"the fanta bottle"` onto the underscored id
/// convention (`the_fanta_bottle`). The agent never sees this mapping.
pub fn normalize_object_name(text: &str) -> String {
    let mut out = String::with_capacity(text.len());
    for c in text.trim().chars().flat_map(char::to_lowercase) {
        if c.is_ascii_alphanumeric() {
            out.push(c);
        } else if !out.ends_with('_') && !out.is_empty() {
            out.push('_');
        }
    }
    while out.ends_with('_') {
        out.pop();
    }
    out
}

/// Natural-language rendering of a canonical id (`the_red_glass` → `the red glass`).
pub fn display_name(id: &str) -> String {
    id.replace('_', " ")
}

impl<T: Scalar> SceneDocument<T> {
    pub fn from_json(text: &str) -> Result<Self, SceneError> {
        serde_json::from_str(text).map_err(|e| SceneError::Parse(e.to_string()))
    }

    pub fn to_json_pretty(&self) -> String {
        serde_json::to_string_pretty(self).expect("scene documents always serialize")
    }
}

impl<T: Scalar> SceneGraph<T> {
    /// Parses and validates a scene-definition document.
    pub fn load(text: &str) -> Result<Self, SceneError> {
        Self::from_document(SceneDocument::from_json(text)?)
    }

    pub fn from_document(doc: SceneDocument<T>) -> Result<Self, SceneError> {
        let robot_spec = doc.robot.unwrap_or_default();
        if let Some(id) = &robot_spec.id {
            if id != ROBOT_ID {
                return Err(SceneError::InvalidId(id.clone()));
            }
        }
        if !robot_spec.reach_origin.is_finite()
            || !(robot_spec.reach_radius.is_finite() && robot_spec.reach_radius > T::zero())
        {
            return Err(SceneError::BadGeometry(ROBOT_ID.into()));
        }
        let mut robot = RobotEntity {
            id: ROBOT_ID.to_string(),
            reach_origin: robot_spec.reach_origin,
            reach_radius: robot_spec.reach_radius,
            held_object_ids: Vec::new(),
            attention: None,
        };

        let mut persons = BTreeMap::new();
        for p in doc.persons {
            if !is_valid_person_id(&p.id) || p.id == ROBOT_ID {
                return Err(SceneError::InvalidId(p.id));
            }
            if persons.contains_key(&p.id) {
                return Err(SceneError::DuplicateId(p.id));
            }
            let finite = p.eye.is_finite() && p.gaze.is_finite() && p.reach_origin.is_finite();
            if !finite || !(p.reach_radius.is_finite() && p.reach_radius > T::zero()) {
                return Err(SceneError::BadGeometry(p.id));
            }
            if (p.gaze.norm() - T::one()).abs() > T::lit(GAZE_NORM_TOLERANCE) {
                return Err(SceneError::NonUnitGaze(p.id));
            }
            persons.insert(
                p.id.clone(),
                PersonEntity {
                    id: p.id,
                    eye_position: p.eye,
                    gaze_direction: p.gaze,
                    reach_origin: p.reach_origin,
                    reach_radius: p.reach_radius,
                    held_object_ids: Vec::new(),
                },
            );
        }

        let mut objects = BTreeMap::new();
        for o in doc.objects {
            if !is_canonical_object_id(&o.id) || o.id == ROBOT_ID {
                return Err(SceneError::InvalidId(o.id));
            }
            if objects.contains_key(&o.id) || persons.contains_key(&o.id) {
                return Err(SceneError::DuplicateId(o.id));
            }
            let volume = BoundingVolume::new(o.center, o.half_extents);
            if !o.center.is_finite() || !volume.has_positive_extents() {
                return Err(SceneError::BadGeometry(o.id));
            }
            objects.insert(
                o.id.clone(),
                ObjectEntity {
                    id: o.id,
                    volume,
                    affordances: o.affordances.into_iter().collect(),
                    fill_contents: o.contents,
                    fill_history: o.history,
                    held_by: o.held_by,
                },
            );
        }

        // Resolve holders; held objects snap to their holder's hand.
        for obj in objects.values_mut() {
            let Some(holder) = obj.held_by.clone() else {
                continue;
            };
            if holder == ROBOT_ID {
                if robot.held_object_ids.len() >= RobotEntity::<T>::MAX_HELD {
                    return Err(SceneError::HandsFull(ROBOT_ID.into()));
                }
                robot.held_object_ids.push(obj.id.clone());
            } else if let Some(person) = persons.get_mut(&holder) {
                obj.volume.center = person.reach_origin;
                person.held_object_ids.push(obj.id.clone());
            } else {
                return Err(SceneError::DanglingReference {
                    entity: obj.id.clone(),
                    reference: holder,
                });
            }
        }

        Ok(Self {
            objects,
            persons,
            robot,
            revision: 0,
        })
    }

    /// Inverse of [`SceneGraph::from_document`], up to the revision counter.
    pub fn to_document(&self) -> SceneDocument<T> {
        SceneDocument {
            objects: self
                .objects
                .values()
                .map(|o| ObjectSpec {
                    id: o.id.clone(),
                    center: o.volume.center,
                    half_extents: o.volume.half_extents,
                    affordances: o.affordances.iter().copied().collect(),
                    contents: o.fill_contents.clone(),
                    history: o.fill_history.clone(),
                    held_by: o.held_by.clone(),
                })
                .collect(),
            persons: self
                .persons
                .values()
                .map(|p| PersonSpec {
                    id: p.id.clone(),
                    eye: p.eye_position,
                    gaze: p.gaze_direction,
                    reach_origin: p.reach_origin,
                    reach_radius: p.reach_radius,
                })
                .collect(),
            robot: Some(RobotSpec {
                id: Some(ROBOT_ID.into()),
                reach_origin: self.robot.reach_origin,
                reach_radius: self.robot.reach_radius,
            }),
        }
    }

    pub fn revision(&self) -> u64 {
        self.revision
    }

    pub fn robot(&self) -> &RobotEntity<T> {
        &self.robot
    }

    pub fn objects(&self) -> impl Iterator<Item = &ObjectEntity<T>> {
        self.objects.values()
    }

    pub fn persons(&self) -> impl Iterator<Item = &PersonEntity<T>> {
        self.persons.values()
    }

    pub fn object(&self, id: &str) -> Result<&ObjectEntity<T>, SceneError> {
        self.objects
            .get(id)
            .ok_or_else(|| SceneError::UnknownObject(id.to_string()))
    }

    pub fn person(&self, id: &str) -> Result<&PersonEntity<T>, SceneError> {
        self.persons
            .get(id)
            .ok_or_else(|| SceneError::UnknownPerson(id.to_string()))
    }

    pub fn has_object(&self, id: &str) -> bool {
        self.objects.contains_key(id)
    }

    pub fn has_person(&self, id: &str) -> bool {
        self.persons.contains_key(id)
    }

    /// Object ids in lexicographic order.
    pub fn list_objects(&self) -> Vec<String> {
        self.objects.keys().cloned().collect()
    }

    /// Person ids in lexicographic order; the robot is not a person.
    pub fn list_persons(&self) -> Vec<String> {
        self.persons.keys().cloned().collect()
    }

    pub fn agent(&self, id: &str) -> Result<AgentRef<'_>, SceneError> {
        if id == ROBOT_ID {
            Ok(AgentRef::Robot)
        } else if let Some((key, _)) = self.persons.get_key_value(id) {
            Ok(AgentRef::Person(key))
        } else {
            Err(SceneError::UnknownAgent(id.to_string()))
        }
    }

    /// Origin and radius of an agent's reach sphere.
    pub fn reach_of(&self, agent_id: &str) -> Result<(Vec3<T>, T), SceneError> {
        match self.agent(agent_id)? {
            AgentRef::Robot => Ok((self.robot.reach_origin, self.robot.reach_radius)),
            AgentRef::Person(p) => {
                let p = &self.persons[p];
                Ok((p.reach_origin, p.reach_radius))
            }
        }
    }

    pub fn is_busy(&self, person_id: &str) -> Result<bool, SceneError> {
        let person = self.person(person_id)?;
        Ok(person
            .held_object_ids
            .iter()
            .filter_map(|id| self.objects.get(id))
            .any(|o| o.has(Affordance::BusyMarker)))
    }

    pub fn is_reachable(&self, agent_id: &str, object_id: &str) -> Result<bool, SceneError> {
        let (origin, radius) = self.reach_of(agent_id)?;
        let object = self.object(object_id)?;
        Ok(origin.distance(object.center()) <= radius)
    }

    /// Whether the sight line from the person's eyes to the object's center is
    /// free of occluders. Occluders the person is holding do not count.
    pub fn is_visible(&self, person_id: &str, object_id: &str) -> Result<bool, SceneError> {
        let person = self.person(person_id)?;
        let target = self.object(object_id)?;
        Ok(self.first_occluder(person, target).is_none())
    }

    /// The first (by id) occluder blocking the person's view of the object.
    pub fn occluder_between(&self, person_id: &str, object_id: &str) -> Result<Option<&str>, SceneError> {
        let person = self.person(person_id)?;
        let target = self.object(object_id)?;
        Ok(self.first_occluder(person, target))
    }

    fn first_occluder(&self, person: &PersonEntity<T>, target: &ObjectEntity<T>) -> Option<&str> {
        let eye = person.eye_position;
        let goal = target.center();
        self.objects
            .values()
            .filter(|o| o.id != target.id && o.has(Affordance::Occluder))
            .filter(|o| o.held_by.as_deref() != Some(person.id.as_str()))
            .find(|o| o.volume.intersects_segment(eye, goal))
            .map(|o| o.id.as_str())
    }

    pub fn hindering_reasons(&self, person_id: &str, object_id: &str) -> Result<HinderingReasons, SceneError> {
        let mut reasons = BTreeSet::new();
        if self.is_busy(person_id)? {
            reasons.insert(Hindrance::Busy);
        }
        if !self.is_visible(person_id, object_id)? {
            reasons.insert(Hindrance::CannotSee);
        }
        if !self.is_reachable(person_id, object_id)? {
            reasons.insert(Hindrance::CannotReach);
        }
        Ok(reasons)
    }

    /// Applies one change. On error the scene is left untouched.
    pub fn mutate(&mut self, change: &SceneChange<T>) -> Result<(), SceneError> {
        match change {
            SceneChange::MoveObject { object, center } => {
                let obj = self.object(object)?;
                if let Some(holder) = &obj.held_by {
                    return Err(SceneError::AlreadyHeld {
                        object: object.clone(),
                        holder: holder.clone(),
                    });
                }
                if !center.is_finite() {
                    return Err(SceneError::BadGeometry(object.clone()));
                }
                self.obj_mut(object).volume.center = *center;
            }
            SceneChange::Attach { agent, object } => {
                self.check_can_attach(agent, object)?;
                self.attach_unchecked(agent, object);
            }
            SceneChange::Detach { agent, object } => {
                self.check_holds(agent, object)?;
                self.detach_unchecked(agent, object);
            }
            SceneChange::Place { agent, object, center } => {
                self.check_holds(agent, object)?;
                if !center.is_finite() {
                    return Err(SceneError::BadGeometry(object.clone()));
                }
                self.detach_unchecked(agent, object);
                self.obj_mut(object).volume.center = *center;
            }
            SceneChange::Handover { from, to, object } => {
                self.check_holds(from, object)?;
                self.person(to)?;
                self.detach_unchecked(from, object);
                self.attach_unchecked(to, object);
            }
            SceneChange::Fill { source, target } => {
                let substance = self.check_fill(source, target)?;
                let obj = self.obj_mut(target);
                obj.fill_contents = Some(substance.clone());
                obj.fill_history.push(substance);
            }
            SceneChange::Pour { source, target, at } => {
                self.check_holds(ROBOT_ID, source)?;
                let substance = self.check_fill(source, target)?;
                if !at.is_finite() {
                    return Err(SceneError::BadGeometry(source.clone()));
                }
                self.obj_mut(source).volume.center = *at;
                let obj = self.obj_mut(target);
                obj.fill_contents = Some(substance.clone());
                obj.fill_history.push(substance);
            }
            SceneChange::Gaze { target } => {
                if !self.objects.contains_key(target) && !self.persons.contains_key(target) {
                    return Err(SceneError::UnknownObject(target.clone()));
                }
                self.robot.attention = Some(target.clone());
            }
        }
        self.revision += 1;
        Ok(())
    }

    /// Whether `source` can be poured into `target`; returns the substance.
    pub fn check_fill(&self, source: &str, target: &str) -> Result<String, SceneError> {
        let src = self.object(source)?;
        let dst = self.object(target)?;
        let substance = match (&src.fill_contents, src.has(Affordance::Pourable)) {
            (Some(s), true) => s.clone(),
            _ => return Err(SceneError::NotPourable(source.to_string())),
        };
        if !dst.has(Affordance::Container) {
            return Err(SceneError::NotContainer(target.to_string()));
        }
        match &dst.fill_contents {
            Some(existing) if *existing != substance => Err(SceneError::ContentsConflict {
                target: target.to_string(),
                existing: existing.clone(),
            }),
            _ => Ok(substance),
        }
    }

    pub fn check_can_attach(&self, agent: &str, object: &str) -> Result<(), SceneError> {
        let kind = self.agent(agent)?;
        let obj = self.object(object)?;
        if let Some(holder) = &obj.held_by {
            return Err(SceneError::AlreadyHeld {
                object: object.to_string(),
                holder: holder.clone(),
            });
        }
        if !obj.has(Affordance::Graspable) {
            return Err(SceneError::NotGraspable(object.to_string()));
        }
        if kind == AgentRef::Robot && self.robot.held_object_ids.len() >= RobotEntity::<T>::MAX_HELD {
            return Err(SceneError::HandsFull(ROBOT_ID.into()));
        }
        Ok(())
    }

    fn check_holds(&self, agent: &str, object: &str) -> Result<(), SceneError> {
        self.agent(agent)?;
        let obj = self.object(object)?;
        if obj.held_by.as_deref() != Some(agent) {
            return Err(SceneError::NotHeld {
                agent: agent.to_string(),
                object: object.to_string(),
            });
        }
        Ok(())
    }

    fn obj_mut(&mut self, id: &str) -> &mut ObjectEntity<T> {
        self.objects.get_mut(id).expect("object checked before mutation")
    }

    fn attach_unchecked(&mut self, agent: &str, object: &str) {
        if agent == ROBOT_ID {
            // The gripper goes to the object, so the object stays put.
            self.robot.held_object_ids.push(object.to_string());
        } else {
            let person = self.persons.get_mut(agent).expect("agent checked");
            person.held_object_ids.push(object.to_string());
            let hand = person.reach_origin;
            self.obj_mut(object).volume.center = hand;
        }
        self.obj_mut(object).held_by = Some(agent.to_string());
    }

    fn detach_unchecked(&mut self, agent: &str, object: &str) {
        let held = if agent == ROBOT_ID {
            &mut self.robot.held_object_ids
        } else {
            &mut self.persons.get_mut(agent).expect("agent checked").held_object_ids
        };
        held.retain(|id| id != object);
        self.obj_mut(object).held_by = None;
    }

    /// Copy of the scene with every position shifted by `offset`.
    pub fn translated(&self, offset: Vec3<T>) -> Self {
        let mut out = self.clone();
        for o in out.objects.values_mut() {
            o.volume = o.volume.translated(offset);
        }
        for p in out.persons.values_mut() {
            p.eye_position = p.eye_position + offset;
            p.reach_origin = p.reach_origin + offset;
        }
        out.robot.reach_origin = out.robot.reach_origin + offset;
        out
    }

    /// Deterministic plain-text dump, ordered by id.
    pub fn describe(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "revision {}", self.revision);
        for o in self.objects.values() {
            let c = o.center();
            let _ = write!(
                s,
                "object {} at ({:.3}, {:.3}, {:.3})",
                o.id,
                c.x.to_f64_lossy(),
                c.y.to_f64_lossy(),
                c.z.to_f64_lossy()
            );
            if let Some(h) = &o.held_by {
                let _ = write!(s, " held by {h}");
            }
            if let Some(f) = &o.fill_contents {
                let _ = write!(s, " contains {f}");
            }
            s.push('\n');
        }
        for p in self.persons.values() {
            let busy = self.is_busy(&p.id).unwrap_or(false);
            let _ = write!(s, "person {} {}", p.id, if busy { "busy" } else { "idle" });
            if !p.held_object_ids.is_empty() {
                let _ = write!(s, " holding {}", p.held_object_ids.join(", "));
            }
            s.push('\n');
        }
        let _ = write!(s, "robot {}", ROBOT_ID);
        if !self.robot.held_object_ids.is_empty() {
            let _ = write!(s, " holding {}", self.robot.held_object_ids.join(", "));
        }
        s.push('\n');
        s
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    type Scene = SceneGraph<f64>;

    const TWO_PEOPLE: &str = r#"{
        "objects": [
            {"id": "the_red_glass", "center": [0.5, 0.0, 0.1], "half_extents": [0.04, 0.04, 0.06],
             "affordances": ["graspable", "container"]},
            {"id": "the_smartphone", "center": [0.3, 0.3, 0.01], "half_extents": [0.04, 0.08, 0.01],
             "affordances": ["graspable", "busy_marker"]},
            {"id": "the_box", "center": [2.0, 2.0, 0.2], "half_extents": [0.1, 0.1, 0.2],
             "affordances": ["occluder"]}
        ],
        "persons": [
            {"id": "Felix", "eye": [-0.8, 0.0, 0.45], "gaze": [1.0, 0.0, 0.0], "reach_origin": [-0.75, 0.0, 0.3]},
            {"id": "Daniel", "eye": [0.0, 0.0, 0.4], "gaze": [-1.0, 0.0, 0.0], "reach_origin": [0.0, 0.0, 0.3]}
        ],
        "robot": {"reach_origin": [0.0, 0.45, 0.3]}
    }"#;

    fn scene() -> Scene {
        Scene::load(TWO_PEOPLE).unwrap()
    }

    #[test]
    fn empty_document_is_valid() {
        let s = Scene::load(r#"{"objects": [], "persons": []}"#).unwrap();
        assert!(s.list_objects().is_empty());
        assert!(s.list_persons().is_empty());
        assert_eq!(s.revision(), 0);
        assert_eq!(s.robot().id, ROBOT_ID);
    }

    #[test]
    fn persons_listed_lexicographically() {
        assert_eq!(scene().list_persons(), vec!["Daniel", "Felix"]);
    }

    #[test]
    fn dangling_holder_is_named() {
        let doc = r#"{"objects": [{"id": "the_red_glass", "center": [0,0,0.1], "half_extents": [0.1,0.1,0.1],
            "held_by": "Nobody"}], "persons": []}"#;
        match Scene::load(doc) {
            Err(SceneError::DanglingReference { entity, reference }) => {
                assert_eq!(entity, "the_red_glass");
                assert_eq!(reference, "Nobody");
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn duplicate_and_malformed_ids_rejected() {
        let dup = r#"{"objects": [
            {"id": "the_box", "center": [0,0,0.1], "half_extents": [0.1,0.1,0.1]},
            {"id": "the_box", "center": [1,0,0.1], "half_extents": [0.1,0.1,0.1]}]}"#;
        assert_eq!(Scene::load(dup).unwrap_err(), SceneError::DuplicateId("the_box".into()));
        let bad = r#"{"objects": [{"id": "The Box", "center": [0,0,0.1], "half_extents": [0.1,0.1,0.1]}]}"#;
        assert_eq!(Scene::load(bad).unwrap_err(), SceneError::InvalidId("The Box".into()));
    }

    #[test]
    fn non_unit_gaze_rejected() {
        let doc = r#"{"persons": [{"id": "Felix", "eye": [0,0,0.4], "gaze": [1,1,0], "reach_origin": [0,0,0.3]}]}"#;
        assert_eq!(Scene::load(doc).unwrap_err(), SceneError::NonUnitGaze("Felix".into()));
    }

    #[test]
    fn malformed_document_is_parse_error() {
        assert!(matches!(Scene::load("{objects: ]"), Err(SceneError::Parse(_))));
    }

    #[test]
    fn busyness_follows_busy_marker() {
        let mut s = scene();
        assert!(!s.is_busy("Daniel").unwrap());
        s.mutate(&SceneChange::Attach { agent: "Daniel".into(), object: "the_red_glass".into() })
            .unwrap();
        assert!(!s.is_busy("Daniel").unwrap());
        s.mutate(&SceneChange::Attach { agent: "Daniel".into(), object: "the_smartphone".into() })
            .unwrap();
        assert!(s.is_busy("Daniel").unwrap());
        assert_eq!(s.object("the_smartphone").unwrap().center(), Vec3::new(0.0, 0.0, 0.3));
        assert_eq!(s.revision(), 2);
    }

    #[test]
    fn unknown_person_is_error() {
        assert_eq!(scene().is_busy("Zed").unwrap_err(), SceneError::UnknownPerson("Zed".into()));
    }

    #[test]
    fn reachability_examples() {
        // origin (0,0,0.3), radius 0.8
        let mut s = scene();
        assert!(s.is_reachable("Daniel", "the_red_glass").unwrap()); // distance ≈ 0.539
        s.mutate(&SceneChange::MoveObject { object: "the_red_glass".into(), center: Vec3::new(1.0, 0.5, 0.1) })
            .unwrap();
        assert!(!s.is_reachable("Daniel", "the_red_glass").unwrap()); // distance ≈ 1.136
        s.mutate(&SceneChange::MoveObject { object: "the_red_glass".into(), center: Vec3::new(0.0, 0.0, 0.3) })
            .unwrap();
        assert!(s.is_reachable("Daniel", "the_red_glass").unwrap());
        assert!(s.is_reachable(ROBOT_ID, "the_red_glass").unwrap());
        assert!(matches!(s.is_reachable("Zed", "the_red_glass"), Err(SceneError::UnknownAgent(_))));
    }

    #[test]
    fn box_between_eye_and_target_occludes() {
        // eye (0,0,0.4), target (1,0,0.1), box at (0.5,0,0.2) ± (0.1,0.1,0.2)
        let mut s = scene();
        s.mutate(&SceneChange::MoveObject { object: "the_red_glass".into(), center: Vec3::new(1.0, 0.0, 0.1) })
            .unwrap();
        assert!(s.is_visible("Daniel", "the_red_glass").unwrap());
        s.mutate(&SceneChange::MoveObject { object: "the_box".into(), center: Vec3::new(0.5, 0.0, 0.2) })
            .unwrap();
        assert!(!s.is_visible("Daniel", "the_red_glass").unwrap());
        assert_eq!(s.occluder_between("Daniel", "the_red_glass").unwrap(), Some("the_box"));
        s.mutate(&SceneChange::MoveObject { object: "the_box".into(), center: Vec3::new(1.5, 0.0, 0.2) })
            .unwrap();
        assert!(s.is_visible("Daniel", "the_red_glass").unwrap());
        s.mutate(&SceneChange::MoveObject { object: "the_box".into(), center: Vec3::new(2.0, 2.0, 0.2) })
            .unwrap();
        assert!(s.is_visible("Daniel", "the_red_glass").unwrap());
    }

    #[test]
    fn hindering_reasons_combine_queries() {
        let mut s = scene();
        assert!(s.hindering_reasons("Daniel", "the_red_glass").unwrap().is_empty());
        s.mutate(&SceneChange::Attach { agent: "Daniel".into(), object: "the_smartphone".into() })
            .unwrap();
        let r = s.hindering_reasons("Daniel", "the_red_glass").unwrap();
        assert_eq!(r.into_iter().collect::<Vec<_>>(), vec![Hindrance::Busy]);
    }

    #[test]
    fn detach_of_non_held_object_fails_without_mutation() {
        let mut s = scene();
        let before = s.clone();
        let err = s
            .mutate(&SceneChange::Detach { agent: "Daniel".into(), object: "the_red_glass".into() })
            .unwrap_err();
        assert!(matches!(err, SceneError::NotHeld { .. }));
        assert_eq!(s, before);
    }

    #[test]
    fn attach_twice_rejected() {
        let mut s = scene();
        s.mutate(&SceneChange::Attach { agent: "Daniel".into(), object: "the_red_glass".into() })
            .unwrap();
        let err = s
            .mutate(&SceneChange::Attach { agent: "Felix".into(), object: "the_red_glass".into() })
            .unwrap_err();
        assert_eq!(
            err,
            SceneError::AlreadyHeld { object: "the_red_glass".into(), holder: "Daniel".into() }
        );
    }

    #[test]
    fn fill_rejects_different_substance() {
        let doc = r#"{"objects": [
            {"id": "the_bottle_of_cola", "center": [0,0,0.1], "half_extents": [0.03,0.03,0.1],
             "affordances": ["pourable", "graspable"], "contents": "cola"},
            {"id": "the_bottle_of_fanta", "center": [0.2,0,0.1], "half_extents": [0.03,0.03,0.1],
             "affordances": ["pourable", "graspable"], "contents": "fanta"},
            {"id": "the_red_glass", "center": [0.4,0,0.06], "half_extents": [0.04,0.04,0.06],
             "affordances": ["container", "graspable"]}]}"#;
        let mut s = Scene::load(doc).unwrap();
        s.mutate(&SceneChange::Fill { source: "the_bottle_of_cola".into(), target: "the_red_glass".into() })
            .unwrap();
        assert_eq!(s.object("the_red_glass").unwrap().fill_contents.as_deref(), Some("cola"));
        let err = s
            .mutate(&SceneChange::Fill { source: "the_bottle_of_fanta".into(), target: "the_red_glass".into() })
            .unwrap_err();
        assert!(matches!(err, SceneError::ContentsConflict { .. }));
        assert_eq!(s.revision(), 1);
    }

    #[test]
    fn name_normalization() {
        assert_eq!(normalize_object_name("the fanta bottle"), "the_fanta_bottle");
        assert_eq!(normalize_object_name("  The Red-Glass! "), "the_red_glass");
        assert_eq!(display_name("the_bottle_of_cola_zero"), "the bottle of cola zero");
    }

    #[test]
    fn document_round_trip_preserves_state() {
        let s = scene();
        let again = Scene::from_document(s.to_document()).unwrap();
        assert_eq!(again, s);
    }
}
