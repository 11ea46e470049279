//! Elementary action simulation: composite actions are expanded into get,
//! put, pour, gaze and pass steps, simulated in a few variations, ranked and
//! applied atomically. Infeasible plans produce a one-sentence explanation
//! that is handed back to the language model verbatim.
//!
//! Ranking uses path length plus a clearance penalty; there is no kinematic
//! model behind it.

use std::collections::BTreeSet;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::geometry::Vec3;
use crate::num::{cmp_scalar, Scalar};
use crate::scene::{SceneChange, SceneError, SceneGraph, ROBOT_ID};

/// Inflation applied to obstacle boxes when checking transport sweeps.
pub const SWEEP_CLEARANCE: f64 = 0.02;
/// No other object may be this close to the center of a container being poured into.
pub const POUR_CLEARANCE_RADIUS: f64 = 0.15;
/// Put locations lie at this fraction of the recipient's reach radius.
pub const PLACEMENT_REACH_FRACTION: f64 = 0.9;
pub const MAX_VARIATIONS: usize = 8;
pub const FAILURE_TEXT_LIMIT: usize = 200;
pub const STALE_PLAN_TEXT: &str = "scene changed, replanning required";

const PLACEMENT_ANGLES_DEG: [f64; 4] = [0.0, 20.0, -20.0, 40.0];
const END_EFFECTOR_OFFSET: f64 = 0.2;
const POUR_LIFT: f64 = 0.02;
const COMFORT_CLEARANCE: f64 = 0.10;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EndEffector {
    Left,
    Right,
}

impl EndEffector {
    pub const ALL: [EndEffector; 2] = [EndEffector::Left, EndEffector::Right];

    fn base<T: Scalar>(self, robot_origin: Vec3<T>) -> Vec3<T> {
        let dx = match self {
            EndEffector::Left => END_EFFECTOR_OFFSET,
            EndEffector::Right => -END_EFFECTOR_OFFSET,
        };
        robot_origin + Vec3::from_f64(dx, 0.0, 0.0)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
#[serde(bound(serialize = "T: Scalar", deserialize = "T: Scalar"))]
pub enum ElementaryAction<T> {
    Get { object: String },
    Put { object: String, location: Vec3<T> },
    Pour { source: String, target: String },
    Gaze { target: String },
    Pass { object: String, person: String },
}

impl<T: Scalar> fmt::Display for ElementaryAction<T> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::Get { object } => write!(f, "get {object}"),
            Self::Put { object, location } => write!(
                f,
                "put {object} at ({:.3}, {:.3}, {:.3})",
                location.x.to_f64_lossy(),
                location.y.to_f64_lossy(),
                location.z.to_f64_lossy()
            ),
            Self::Pour { source, target } => write!(f, "pour {source} into {target}"),
            Self::Gaze { target } => write!(f, "gaze at {target}"),
            Self::Pass { object, person } => write!(f, "pass {object} to {person}"),
        }
    }
}

/// The action tools' compositions of elementary actions.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(tag = "composite", rename_all = "snake_case")]
pub enum Composite {
    MoveObjectToPerson { object: String, person: String },
    HandObjectOverToPerson { object: String, person: String },
    PourInto { source: String, target: String },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound(serialize = "T: Scalar", deserialize = "T: Scalar"))]
pub struct ActionVariation<T> {
    pub steps: Vec<ElementaryAction<T>>,
    pub end_effector: EndEffector,
    /// Lower is better.
    pub score: T,
    /// Scene revision the variation was planned against.
    pub revision: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "outcome", rename_all = "snake_case")]
#[serde(bound(serialize = "T: Scalar", deserialize = "T: Scalar"))]
pub enum ActionOutcome<T> {
    Success { scene_delta: Vec<SceneChange<T>> },
    Failure { failure_text: String },
}

impl<T> ActionOutcome<T> {
    pub fn is_success(&self) -> bool {
        matches!(self, ActionOutcome::Success { .. })
    }

    pub fn failure_text(&self) -> Option<&str> {
        match self {
            ActionOutcome::Failure { failure_text } => Some(failure_text),
            ActionOutcome::Success { .. } => None,
        }
    }
}

/// Why a step (and therefore a variation) is infeasible. Variant order is the
/// priority used when several reasons compete for the feedback sentence.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(tag = "reason", rename_all = "snake_case")]
pub enum BlockReason {
    UnknownObject { object: String },
    UnknownPerson { person: String },
    NotGraspable { object: String },
    HeldByOther { object: String, holder: String },
    HandsFull,
    NotPourable { source: String },
    NotContainer { target: String },
    ContentsConflict { target: String, existing: String },
    UnreachableForRobot { object: String },
    DestinationUnreachable { object: String, destination: String },
    PourBlocked { target: String, blocker: String },
    NoCollisionFreePath { object: String, blocker: String },
}

impl fmt::Display for BlockReason {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::UnknownObject { object } => write!(f, "There is no object named {object} in the scene."),
            Self::UnknownPerson { person } => write!(f, "There is no person named {person} in the scene."),
            Self::NotGraspable { object } => write!(f, "{ROBOT_ID} cannot grasp {object}."),
            Self::HeldByOther { object, holder } => {
                write!(f, "{ROBOT_ID} cannot take {object}: it is held by {holder}.")
            }
            Self::HandsFull => write!(f, "{ROBOT_ID} has no free hand."),
            Self::NotPourable { source } => write!(f, "Cannot pour from {source}: it contains nothing to pour."),
            Self::NotContainer { target } => write!(f, "Cannot pour into {target}: it is not a container."),
            Self::ContentsConflict { target, existing } => {
                write!(f, "Cannot pour into {target}: it already contains {existing}.")
            }
            Self::UnreachableForRobot { object } => write!(f, "{ROBOT_ID} cannot reach {object}."),
            Self::DestinationUnreachable { object, destination } => {
                write!(f, "{ROBOT_ID} cannot bring {object} to {destination}: the destination is out of reach.")
            }
            Self::PourBlocked { target, blocker } => {
                write!(f, "Cannot pour into {target}: {blocker} blocks the pouring motion.")
            }
            Self::NoCollisionFreePath { object, blocker } => {
                write!(f, "Cannot move {object}: {blocker} blocks the path.")
            }
        }
    }
}

impl From<SceneError> for BlockReason {
    fn from(e: SceneError) -> Self {
        match e {
            SceneError::UnknownPerson(person) => Self::UnknownPerson { person },
            SceneError::AlreadyHeld { object, holder } => Self::HeldByOther { object, holder },
            SceneError::NotHeld { object, .. } => Self::HeldByOther {
                object,
                holder: "nobody".into(),
            },
            SceneError::HandsFull(_) => Self::HandsFull,
            SceneError::NotGraspable(object) => Self::NotGraspable { object },
            SceneError::NotPourable(source) => Self::NotPourable { source },
            SceneError::NotContainer(target) => Self::NotContainer { target },
            SceneError::ContentsConflict { target, existing } => Self::ContentsConflict { target, existing },
            SceneError::UnknownObject(object)
            | SceneError::UnknownAgent(object)
            | SceneError::BadGeometry(object)
            | SceneError::InvalidId(object)
            | SceneError::DuplicateId(object)
            | SceneError::NonUnitGaze(object) => Self::UnknownObject { object },
            SceneError::DanglingReference { reference, .. } => Self::UnknownObject { object: reference },
            SceneError::Parse(msg) => Self::UnknownObject { object: msg },
        }
    }
}

/// A plan with no feasible variation.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PlanFailure {
    /// Deduplicated, in priority order; never empty.
    pub reasons: Vec<BlockReason>,
}

impl PlanFailure {
    pub fn failure_text(&self) -> String {
        render_failure(&self.reasons)
    }
}

impl fmt::Display for PlanFailure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.failure_text())
    }
}

/// One deterministic sentence for a non-empty reason list.
///
/// # Panics
/// If `reasons` is empty.
pub fn render_failure(reasons: &[BlockReason]) -> String {
    let first = reasons
        .iter()
        .min()
        .expect("render_failure needs at least one reason");
    truncate_sentence(first.to_string())
}

fn truncate_sentence(mut text: String) -> String {
    if text.chars().count() <= FAILURE_TEXT_LIMIT {
        return text;
    }
    let cut = text
        .char_indices()
        .nth(FAILURE_TEXT_LIMIT - 3)
        .map(|(i, _)| i)
        .unwrap_or(text.len());
    text.truncate(cut);
    text.push_str("...");
    text
}

/// Expands a composite action, simulates every variation and returns the
/// feasible ones, best first.
pub fn plan<T: Scalar>(
    scene: &SceneGraph<T>,
    composite: &Composite,
) -> Result<Vec<ActionVariation<T>>, PlanFailure> {
    let candidates = match expand(scene, composite) {
        Ok(c) => c,
        Err(reasons) => return Err(failure(reasons)),
    };

    let mut reasons = BTreeSet::new();
    let mut variations = Vec::new();
    for end_effector in EndEffector::ALL {
        for steps in &candidates {
            match simulate(scene, steps, end_effector) {
                Ok(sim) => variations.push(ActionVariation {
                    steps: steps.clone(),
                    end_effector,
                    score: sim.score,
                    revision: scene.revision(),
                }),
                Err(e) => {
                    reasons.insert(e.reason);
                }
            }
        }
    }
    if variations.is_empty() {
        return Err(failure(reasons));
    }
    variations.sort_by(|a, b| {
        cmp_scalar(a.score, b.score)
            .then(a.end_effector.cmp(&b.end_effector))
            .then_with(|| step_key(&a.steps).cmp(&step_key(&b.steps)))
    });
    variations.truncate(MAX_VARIATIONS);
    Ok(variations)
}

fn failure(reasons: impl IntoIterator<Item = BlockReason>) -> PlanFailure {
    let set: BTreeSet<_> = reasons.into_iter().collect();
    PlanFailure {
        reasons: set.into_iter().collect(),
    }
}

fn step_key<T: Scalar>(steps: &[ElementaryAction<T>]) -> Vec<String> {
    steps.iter().map(|s| format!("{s:?}")).collect()
}

/// Applies a planned variation. Either every step is applied or none is.
pub fn execute<T: Scalar>(scene: &mut SceneGraph<T>, variation: &ActionVariation<T>) -> ActionOutcome<T> {
    if variation.revision != scene.revision() {
        return ActionOutcome::Failure {
            failure_text: STALE_PLAN_TEXT.to_string(),
        };
    }
    match simulate(scene, &variation.steps, variation.end_effector) {
        Ok(sim) => {
            *scene = sim.scene;
            ActionOutcome::Success {
                scene_delta: sim.changes,
            }
        }
        Err(e) => ActionOutcome::Failure {
            failure_text: truncate_sentence(format!(
                "Step {} ({}) failed: {}",
                e.step + 1,
                variation.steps[e.step],
                e.reason
            )),
        },
    }
}

/// Plans and executes the best variation, as the action tools do.
pub fn plan_and_execute<T: Scalar>(scene: &mut SceneGraph<T>, composite: &Composite) -> ActionOutcome<T> {
    match plan(scene, composite) {
        Ok(variations) => execute(scene, &variations[0]),
        Err(f) => ActionOutcome::Failure {
            failure_text: f.failure_text(),
        },
    }
}

fn expand<T: Scalar>(
    scene: &SceneGraph<T>,
    composite: &Composite,
) -> Result<Vec<Vec<ElementaryAction<T>>>, Vec<BlockReason>> {
    let need_object = |id: &str| {
        scene
            .object(id)
            .map_err(|_| BlockReason::UnknownObject { object: id.to_string() })
    };
    let need_person = |id: &str| {
        scene
            .person(id)
            .map_err(|_| BlockReason::UnknownPerson { person: id.to_string() })
    };
    match composite {
        Composite::MoveObjectToPerson { object, person } => {
            let obj = need_object(object).map_err(|r| vec![r])?;
            let p = need_person(person).map_err(|r| vec![r])?;
            let locations = placement_candidates(obj.center(), p.reach_origin, p.reach_radius);
            Ok(locations
                .into_iter()
                .map(|location| {
                    vec![
                        ElementaryAction::Get { object: object.clone() },
                        ElementaryAction::Put {
                            object: object.clone(),
                            location,
                        },
                    ]
                })
                .collect())
        }
        Composite::HandObjectOverToPerson { object, person } => {
            need_object(object).map_err(|r| vec![r])?;
            need_person(person).map_err(|r| vec![r])?;
            Ok(vec![vec![
                ElementaryAction::Get { object: object.clone() },
                ElementaryAction::Pass {
                    object: object.clone(),
                    person: person.clone(),
                },
            ]])
        }
        Composite::PourInto { source, target } => {
            let mut missing = Vec::new();
            let src = need_object(source).map_err(|r| missing.push(r)).ok();
            need_object(target).map_err(|r| missing.push(r)).ok();
            let Some(src) = src.filter(|_| missing.is_empty()) else {
                return Err(missing);
            };
            Ok(vec![vec![
                ElementaryAction::Get { object: source.clone() },
                ElementaryAction::Gaze { target: target.clone() },
                ElementaryAction::Pour {
                    source: source.clone(),
                    target: target.clone(),
                },
                ElementaryAction::Put {
                    object: source.clone(),
                    location: src.center(),
                },
            ]])
        }
    }
}

/// Points at `PLACEMENT_REACH_FRACTION · radius` from the recipient's reach
/// origin, on the object's side, keeping the object's resting height. The
/// first candidate lies on the object–person line; the rest are rotated
/// about the vertical through the reach origin.
pub fn placement_candidates<T: Scalar>(object_center: Vec3<T>, origin: Vec3<T>, radius: T) -> Vec<Vec3<T>> {
    let radial = radius * T::lit(PLACEMENT_REACH_FRACTION);
    let dz = object_center.z - origin.z;
    let horizontal = (radial * radial - dz * dz).max(T::zero()).sqrt();
    let (mut dx, mut dy) = (object_center.x - origin.x, object_center.y - origin.y);
    let len = (dx * dx + dy * dy).sqrt();
    if len > T::zero() {
        dx = dx / len;
        dy = dy / len;
    } else {
        dx = T::one();
        dy = T::zero();
    }
    PLACEMENT_ANGLES_DEG
        .iter()
        .map(|deg| {
            let (s, c) = T::lit(deg.to_radians()).sin_cos();
            let (rx, ry) = (dx * c - dy * s, dx * s + dy * c);
            Vec3::new(
                origin.x + rx * horizontal,
                origin.y + ry * horizontal,
                object_center.z,
            )
        })
        .collect()
}

struct Simulation<T> {
    scene: SceneGraph<T>,
    changes: Vec<SceneChange<T>>,
    score: T,
}

struct StepFailure {
    step: usize,
    reason: BlockReason,
}

/// Runs the steps against a copy of the scene, checking feasibility as it goes.
fn simulate<T: Scalar>(
    scene: &SceneGraph<T>,
    steps: &[ElementaryAction<T>],
    end_effector: EndEffector,
) -> Result<Simulation<T>, StepFailure> {
    let mut work = scene.clone();
    let mut changes = Vec::with_capacity(steps.len());
    let mut score = T::zero();
    let (robot_origin, robot_radius) = (scene.robot().reach_origin, scene.robot().reach_radius);
    let hand_base = end_effector.base(robot_origin);

    for (index, step) in steps.iter().enumerate() {
        let fail = |reason: BlockReason| StepFailure { step: index, reason };
        let change = match step {
            ElementaryAction::Get { object } => {
                work.check_can_attach(ROBOT_ID, object).map_err(|e| fail(e.into()))?;
                let center = work.object(object).map_err(|e| fail(e.into()))?.center();
                if robot_origin.distance(center) > robot_radius {
                    return Err(fail(BlockReason::UnreachableForRobot { object: object.clone() }));
                }
                score = score + hand_base.distance(center);
                SceneChange::Attach {
                    agent: ROBOT_ID.into(),
                    object: object.clone(),
                }
            }
            ElementaryAction::Put { object, location } => {
                let from = work.object(object).map_err(|e| fail(e.into()))?.center();
                if robot_origin.distance(*location) > robot_radius {
                    return Err(fail(BlockReason::DestinationUnreachable {
                        object: object.clone(),
                        destination: "the target location".into(),
                    }));
                }
                score = score + sweep(&work, object, from, *location).map_err(fail)?;
                SceneChange::Place {
                    agent: ROBOT_ID.into(),
                    object: object.clone(),
                    center: *location,
                }
            }
            ElementaryAction::Pass { object, person } => {
                let from = work.object(object).map_err(|e| fail(e.into()))?.center();
                let hand = work.person(person).map_err(|e| fail(e.into()))?.reach_origin;
                if robot_origin.distance(hand) > robot_radius {
                    return Err(fail(BlockReason::DestinationUnreachable {
                        object: object.clone(),
                        destination: person.clone(),
                    }));
                }
                score = score + sweep(&work, object, from, hand).map_err(fail)?;
                SceneChange::Handover {
                    from: ROBOT_ID.into(),
                    to: person.clone(),
                    object: object.clone(),
                }
            }
            ElementaryAction::Gaze { target } => SceneChange::Gaze { target: target.clone() },
            ElementaryAction::Pour { source, target } => {
                work.check_fill(source, target).map_err(|e| fail(e.into()))?;
                let src = work.object(source).map_err(|e| fail(e.into()))?;
                let dst = work.object(target).map_err(|e| fail(e.into()))?;
                let at = dst.center()
                    + Vec3::new(
                        T::zero(),
                        T::zero(),
                        dst.volume.half_extents.z + src.volume.half_extents.z + T::lit(POUR_LIFT),
                    );
                let from = src.center();
                if robot_origin.distance(at) > robot_radius {
                    return Err(fail(BlockReason::DestinationUnreachable {
                        object: source.clone(),
                        destination: target.clone(),
                    }));
                }
                let clearance = T::lit(POUR_CLEARANCE_RADIUS);
                if let Some(blocker) = work
                    .objects()
                    .filter(|o| o.id != *source && o.id != *target && o.held_by.is_none())
                    .find(|o| o.volume.distance_to_point(dst.center()) < clearance)
                {
                    return Err(fail(BlockReason::PourBlocked {
                        target: target.clone(),
                        blocker: blocker.id.clone(),
                    }));
                }
                score = score + sweep(&work, source, from, at).map_err(fail)?;
                SceneChange::Pour {
                    source: source.clone(),
                    target: target.clone(),
                    at,
                }
            }
        };
        work.mutate(&change).map_err(|e| fail(e.into()))?;
        changes.push(change);
    }
    Ok(Simulation {
        scene: work,
        changes,
        score,
    })
}

/// Checks the straight-line transport of `object` and returns its cost
/// (length plus a penalty for passing closer than the comfort clearance).
fn sweep<T: Scalar>(scene: &SceneGraph<T>, object: &str, from: Vec3<T>, to: Vec3<T>) -> Result<T, BlockReason> {
    let inflation = T::lit(SWEEP_CLEARANCE);
    let comfort = T::lit(COMFORT_CLEARANCE);
    let mut penalty = T::zero();
    for obstacle in scene.objects().filter(|o| o.id != object && o.held_by.is_none()) {
        if obstacle.volume.inflated(inflation).intersects_segment(from, to) {
            return Err(BlockReason::NoCollisionFreePath {
                object: object.to_string(),
                blocker: obstacle.id.clone(),
            });
        }
        let gap = obstacle.volume.distance_to_segment(from, to);
        if gap < comfort {
            penalty = penalty + (comfort - gap);
        }
    }
    Ok(from.distance(to) + penalty)
}

#[cfg(test)]
mod tests {
    use super::*;

    type Scene = SceneGraph<f64>;

    fn table() -> Scene {
        Scene::load(
            r#"{
            "objects": [
                {"id": "the_bottle_of_cola_zero", "center": [0.0, -0.2, 0.12], "half_extents": [0.035, 0.035, 0.12],
                 "affordances": ["graspable", "pourable"], "contents": "cola_zero"},
                {"id": "the_blue_glass", "center": [0.3, -0.2, 0.06], "half_extents": [0.04, 0.04, 0.06],
                 "affordances": ["graspable", "container"]},
                {"id": "the_red_glass", "center": [0.3, 0.1, 0.06], "half_extents": [0.04, 0.04, 0.06],
                 "affordances": ["graspable", "container"]},
                {"id": "the_box", "center": [-0.3, 0.4, 0.2], "half_extents": [0.1, 0.12, 0.2],
                 "affordances": ["occluder"]}
            ],
            "persons": [
                {"id": "Felix", "eye": [-0.8, 0.0, 0.45], "gaze": [1.0, 0.0, 0.0], "reach_origin": [-0.75, 0.0, 0.3]},
                {"id": "Daniel", "eye": [0.8, 0.0, 0.45], "gaze": [-1.0, 0.0, 0.0], "reach_origin": [0.75, 0.0, 0.3]}
            ],
            "robot": {"reach_origin": [0.0, 0.45, 0.3], "reach_radius": 1.0}
        }"#,
        )
        .unwrap()
    }

    fn pour(source: &str, target: &str) -> Composite {
        Composite::PourInto {
            source: source.into(),
            target: target.into(),
        }
    }

    #[test]
    fn clear_pour_plans_and_executes() {
        let mut s = table();
        let vars = plan(&s, &pour("the_bottle_of_cola_zero", "the_blue_glass")).unwrap();
        assert_eq!(vars.len(), 2);
        assert_eq!(vars[0].steps.len(), 4);
        let before = s.revision();
        let out = execute(&mut s, &vars[0]);
        assert!(out.is_success(), "{out:?}");
        assert_eq!(s.revision(), before + 4);
        let glass = s.object("the_blue_glass").unwrap();
        assert_eq!(glass.fill_contents.as_deref(), Some("cola_zero"));
        // The bottle is put back where it came from.
        assert_eq!(s.object("the_bottle_of_cola_zero").unwrap().center(), Vec3::new(0.0, -0.2, 0.12));
        assert!(s.robot().held_object_ids.is_empty());
    }

    #[test]
    fn box_next_to_glass_blocks_pouring() {
        let mut s = table();
        s.mutate(&SceneChange::MoveObject {
            object: "the_box".into(),
            center: Vec3::new(0.3, -0.38, 0.2),
        })
        .unwrap();
        let err = plan(&s, &pour("the_bottle_of_cola_zero", "the_blue_glass")).unwrap_err();
        assert_eq!(
            err.failure_text(),
            "Cannot pour into the_blue_glass: the_box blocks the pouring motion."
        );
    }

    #[test]
    fn move_to_person_lands_in_reach() {
        let mut s = table();
        let c = Composite::MoveObjectToPerson {
            object: "the_red_glass".into(),
            person: "Felix".into(),
        };
        let vars = plan(&s, &c).unwrap();
        assert!(vars.len() <= MAX_VARIATIONS);
        assert!(vars.windows(2).all(|w| w[0].score <= w[1].score));
        assert!(execute(&mut s, &vars[0]).is_success());
        assert!(s.is_reachable("Felix", "the_red_glass").unwrap());
    }

    #[test]
    fn already_reachable_object_still_plannable() {
        let s = table();
        let c = Composite::MoveObjectToPerson {
            object: "the_red_glass".into(),
            person: "Daniel".into(),
        };
        assert!(s.is_reachable("Daniel", "the_red_glass").unwrap());
        let vars = plan(&s, &c).unwrap();
        assert_eq!(vars[0].steps.len(), 2);
    }

    #[test]
    fn handover_appends_to_held_list() {
        let mut s = table();
        let c = Composite::HandObjectOverToPerson {
            object: "the_red_glass".into(),
            person: "Felix".into(),
        };
        assert!(plan_and_execute(&mut s, &c).is_success());
        assert_eq!(s.person("Felix").unwrap().held_object_ids, vec!["the_red_glass"]);
    }

    #[test]
    fn stale_plan_is_rejected_without_mutation() {
        let mut s = table();
        let c = Composite::HandObjectOverToPerson {
            object: "the_red_glass".into(),
            person: "Felix".into(),
        };
        let vars = plan(&s, &c).unwrap();
        s.mutate(&SceneChange::Gaze { target: "Felix".into() }).unwrap();
        let snapshot = s.clone();
        let out = execute(&mut s, &vars[0]);
        assert_eq!(out.failure_text(), Some(STALE_PLAN_TEXT));
        assert_eq!(s, snapshot);
    }

    #[test]
    fn ungraspable_box_cannot_be_moved() {
        let s = table();
        let c = Composite::MoveObjectToPerson {
            object: "the_box".into(),
            person: "Daniel".into(),
        };
        assert_eq!(plan(&s, &c).unwrap_err().failure_text(), "the_robot cannot grasp the_box.");
    }

    #[test]
    fn failure_sentences_are_frozen() {
        assert_eq!(
            render_failure(&[BlockReason::PourBlocked {
                target: "the_blue_glass".into(),
                blocker: "the_box".into()
            }]),
            "Cannot pour into the_blue_glass: the_box blocks the pouring motion."
        );
        assert_eq!(
            render_failure(&[BlockReason::UnreachableForRobot { object: "the_box".into() }]),
            "the_robot cannot reach the_box."
        );
    }

    #[test]
    #[should_panic(expected = "at least one reason")]
    fn render_failure_requires_reasons() {
        render_failure(&[]);
    }

    #[test]
    fn long_ids_are_truncated() {
        let id = "x".repeat(400);
        let text = render_failure(&[BlockReason::UnreachableForRobot { object: id }]);
        assert_eq!(text.chars().count(), FAILURE_TEXT_LIMIT);
    }

    #[test]
    fn placements_sit_at_fixed_fraction_of_reach() {
        let origin = Vec3::new(-0.75, 0.0, 0.3);
        for p in placement_candidates(Vec3::new(0.2, -0.1, 0.1), origin, 0.8) {
            assert!((p.distance(origin) - 0.72f64).abs() < 1e-12);
            assert_eq!(p.z, 0.1);
        }
    }
}
