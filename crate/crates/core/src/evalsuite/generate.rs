//! Builds the isolated test cases and the five-step situated scenario from
//! the checked-in fixtures, checking that every condition is realised.

use std::collections::BTreeMap;

use serde::Deserialize;

use super::{Condition, Deliverable, EvalError, ExpectedBehavior, Scenario, TestCase};
use crate::actions::{plan, Composite};
use crate::geometry::Vec3;
use crate::scene::{display_name, Hindrance, SceneChange};
use crate::{Scene, SceneDocument};

pub const TEMPLATES: [&str; 5] = [
    "Daniel, could you hand me PLACEHOLDER?",
    "Could you hand me PLACEHOLDER?",
    "Please hand me PLACEHOLDER.",
    "Could you pass me PLACEHOLDER?",
    "Give me PLACEHOLDER.",
];

const PLACEHOLDER: &str = "PLACEHOLDER";
const BOX: &str = "the_box";
const SMARTPHONE: &str = "the_smartphone";

/// `(scenario, distribution index, scene document)`.
pub const DISTRIBUTIONS: [(Scenario, u8, &str); 15] = [
    (Scenario::Softdrink, 1, include_str!("../../fixtures/distributions/softdrink/d1.scene.json")),
    (Scenario::Softdrink, 2, include_str!("../../fixtures/distributions/softdrink/d2.scene.json")),
    (Scenario::Softdrink, 3, include_str!("../../fixtures/distributions/softdrink/d3.scene.json")),
    (Scenario::Softdrink, 4, include_str!("../../fixtures/distributions/softdrink/d4.scene.json")),
    (Scenario::Softdrink, 5, include_str!("../../fixtures/distributions/softdrink/d5.scene.json")),
    (Scenario::Coffee, 1, include_str!("../../fixtures/distributions/coffee/d1.scene.json")),
    (Scenario::Coffee, 2, include_str!("../../fixtures/distributions/coffee/d2.scene.json")),
    (Scenario::Coffee, 3, include_str!("../../fixtures/distributions/coffee/d3.scene.json")),
    (Scenario::Coffee, 4, include_str!("../../fixtures/distributions/coffee/d4.scene.json")),
    (Scenario::Coffee, 5, include_str!("../../fixtures/distributions/coffee/d5.scene.json")),
    (Scenario::Dinner, 1, include_str!("../../fixtures/distributions/dinner/d1.scene.json")),
    (Scenario::Dinner, 2, include_str!("../../fixtures/distributions/dinner/d2.scene.json")),
    (Scenario::Dinner, 3, include_str!("../../fixtures/distributions/dinner/d3.scene.json")),
    (Scenario::Dinner, 4, include_str!("../../fixtures/distributions/dinner/d4.scene.json")),
    (Scenario::Dinner, 5, include_str!("../../fixtures/distributions/dinner/d5.scene.json")),
];

const MANIFEST: &str = include_str!("../../fixtures/suite.json");
/// The interactive scenes shipped with the crate, by name.
pub const BUILTIN_SCENES: [(&str, &str); 3] = [
    ("softdrink", include_str!("../../fixtures/scenes/softdrink.scene.json")),
    ("coffee", include_str!("../../fixtures/scenes/coffee.scene.json")),
    ("dinner", include_str!("../../fixtures/scenes/dinner.scene.json")),
];

const SITUATED_SCENE: &str = BUILTIN_SCENES[0].1;

#[derive(Deserialize)]
struct Manifest {
    sender: String,
    receiver: String,
    scenarios: BTreeMap<Scenario, ScenarioManifest>,
}

#[derive(Deserialize)]
struct ScenarioManifest {
    items: Vec<String>,
}

pub fn render_template(index: u8, object_id: &str) -> String {
    TEMPLATES[usize::from(index) - 1].replace(PLACEHOLDER, &display_name(object_id))
}

/// All 300 cases, ordered by scenario, distribution, template, condition.
pub fn generate_isolated_suite() -> Result<Vec<TestCase>, EvalError> {
    let mut cases = Vec::with_capacity(300);
    for scenario in Scenario::ALL {
        for d in 1..=5 {
            for t in 1..=5 {
                for condition in Condition::ALL {
                    cases.push(isolated_case(scenario, d, t, condition)?);
                }
            }
        }
    }
    Ok(cases)
}

fn fixture_error(name: &str, detail: impl ToString) -> EvalError {
    EvalError::Fixture {
        name: name.to_string(),
        detail: detail.to_string(),
    }
}

pub fn isolated_case(scenario: Scenario, d: u8, t: u8, condition: Condition) -> Result<TestCase, EvalError> {
    let manifest: Manifest = serde_json::from_str(MANIFEST).map_err(|e| fixture_error("suite.json", e))?;
    let items = &manifest
        .scenarios
        .get(&scenario)
        .ok_or_else(|| fixture_error("suite.json", format!("no scenario {}", scenario.as_str())))?
        .items;
    let (_, _, text) = DISTRIBUTIONS
        .iter()
        .find(|(s, i, _)| *s == scenario && *i == d)
        .ok_or_else(|| fixture_error(scenario.as_str(), format!("no distribution {d}")))?;
    let name = format!("{}/d{d}", scenario.as_str());
    let mut scene = Scene::load(text).map_err(|e| fixture_error(&name, e))?;

    let id = format!("{}-d{d}-t{t}-{}", scenario.as_str(), condition.as_str());
    let fail = |detail: String| EvalError::Generation {
        case: id.clone(),
        detail,
    };
    let target = items[(usize::from(d) - 1 + usize::from(t) - 1) % items.len()].clone();
    let (sender, receiver) = (manifest.sender.as_str(), manifest.receiver.as_str());

    let intended = match condition {
        Condition::Unobtrusive => None,
        Condition::Busyness => {
            scene
                .mutate(&SceneChange::Attach {
                    agent: receiver.into(),
                    object: SMARTPHONE.into(),
                })
                .map_err(|e| fail(e.to_string()))?;
            Some(Hindrance::Busy)
        }
        Condition::Visibility => {
            place_occluder(&mut scene, receiver, &target).map_err(fail)?;
            Some(Hindrance::CannotSee)
        }
        Condition::Reachability => {
            move_out_of_reach(&mut scene, receiver, &target).map_err(fail)?;
            Some(Hindrance::CannotReach)
        }
    };

    let reasons = scene.hindering_reasons(receiver, &target).map_err(|e| fail(e.to_string()))?;
    if reasons.iter().copied().collect::<Vec<_>>() != intended.into_iter().collect::<Vec<_>>() {
        return Err(fail(format!("expected hindrance {intended:?}, scene has {reasons:?}")));
    }

    let expected = match condition {
        Condition::Unobtrusive => ExpectedBehavior::no_help(sender),
        _ => {
            // The rule-following delivery must be physically possible.
            let composite = if condition == Condition::Busyness {
                Composite::MoveObjectToPerson {
                    object: target.clone(),
                    person: sender.into(),
                }
            } else {
                Composite::HandObjectOverToPerson {
                    object: target.clone(),
                    person: sender.into(),
                }
            };
            plan(&scene, &composite).map_err(|e| fail(format!("delivery not feasible: {}", e.failure_text())))?;
            ExpectedBehavior::help(sender, Deliverable::Object { object: target.clone() })
        }
    };

    Ok(TestCase {
        id,
        scenario,
        distribution_index: d,
        utterance_template_index: t,
        condition,
        utterance: render_template(t, &target),
        target_object: target,
        sender: sender.into(),
        receiver: receiver.into(),
        expected,
        scene: scene.to_document(),
    })
}

fn overlaps_anything(scene: &Scene, id: &str, margin: f64) -> Option<String> {
    let me = scene.object(id).ok()?.volume.inflated(margin);
    scene
        .objects()
        .filter(|o| o.id != id && o.held_by.is_none())
        .find(|o| o.volume.overlaps(&me))
        .map(|o| o.id.clone())
}

/// Puts the box, resting on the table, on the receiver's line of sight.
fn place_occluder(scene: &mut Scene, receiver: &str, target: &str) -> Result<(), String> {
    let eye = scene.person(receiver).map_err(|e| e.to_string())?.eye_position;
    let goal = scene.object(target).map_err(|e| e.to_string())?.center();
    let half_z = scene.object(BOX).map_err(|e| e.to_string())?.volume.half_extents.z;
    for fraction in [0.5, 0.4, 0.6, 0.3, 0.7] {
        let p = eye.lerp(goal, fraction);
        let mut trial = scene.clone();
        trial
            .mutate(&SceneChange::MoveObject {
                object: BOX.into(),
                center: Vec3::new(p.x, p.y, half_z),
            })
            .map_err(|e| e.to_string())?;
        if overlaps_anything(&trial, BOX, 0.01).is_none() && !trial.is_visible(receiver, target).unwrap_or(true) {
            *scene = trial;
            return Ok(());
        }
    }
    Err(format!("no free spot for {BOX} between {receiver} and {target}"))
}

/// Moves the target to the nearest free spot beyond the receiver's reach
/// that the robot can still reach and the receiver can still see.
fn move_out_of_reach(scene: &mut Scene, receiver: &str, target: &str) -> Result<(), String> {
    let obj = scene.object(target).map_err(|e| e.to_string())?.center();
    let (origin, radius) = scene.reach_of(receiver).map_err(|e| e.to_string())?;
    let robot = scene.robot().clone();
    let mut candidates = Vec::new();
    for i in 0..=16 {
        for j in 0..=16 {
            let p = Vec3::new(-0.45 + 0.05 * f64::from(i), -0.4 + 0.05 * f64::from(j), obj.z);
            candidates.push(p);
        }
    }
    let anchor = Vec3::new(-0.2, obj.y, obj.z);
    candidates.sort_by(|a, b| {
        a.distance(anchor)
            .partial_cmp(&b.distance(anchor))
            .unwrap()
            .then(a.x.partial_cmp(&b.x).unwrap())
            .then(a.y.partial_cmp(&b.y).unwrap())
    });
    for p in candidates {
        if origin.distance(p) <= radius + 0.05 || robot.reach_origin.distance(p) > robot.reach_radius - 0.05 {
            continue;
        }
        let mut trial = scene.clone();
        trial
            .mutate(&SceneChange::MoveObject {
                object: target.into(),
                center: p,
            })
            .map_err(|e| e.to_string())?;
        if overlaps_anything(&trial, target, 0.03).is_some() || !trial.is_visible(receiver, target).unwrap_or(false) {
            continue;
        }
        *scene = trial;
        return Ok(());
    }
    Err(format!("no spot for {target} outside the reach of {receiver}"))
}

// ---------------------------------------------------------------------------
// Situated scenario
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct SituatedStep {
    pub index: u8,
    /// Scene changes applied just before the utterance.
    pub setup: Vec<crate::SceneChange>,
    pub speaker: String,
    pub listener: String,
    pub text: String,
    pub expected: ExpectedBehavior,
}

#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct SituatedScenario {
    pub scene: SceneDocument,
    pub steps: Vec<SituatedStep>,
}

pub fn generate_situated_scenario() -> SituatedScenario {
    let scene: SceneDocument = serde_json::from_str(SITUATED_SCENE).expect("situated scene fixture parses");
    let step = |index, setup, speaker: &str, listener: &str, text: &str, expected| SituatedStep {
        index,
        setup,
        speaker: speaker.into(),
        listener: listener.into(),
        text: text.into(),
        expected,
    };
    SituatedScenario {
        scene,
        steps: vec![
            step(1, vec![], "Felix", "Daniel", "Daniel, what drinks do we have?", ExpectedBehavior::no_help("Felix")),
            step(
                2,
                vec![],
                "Daniel",
                "Felix",
                "We have cola and fanta.",
                ExpectedBehavior::help(
                    "Daniel",
                    Deliverable::Information {
                        facts: vec!["cola zero".into(), "cola_zero".into()],
                    },
                ),
            ),
            step(
                3,
                vec![],
                "Felix",
                "Daniel",
                "Could you pass me the red glass?",
                ExpectedBehavior::help(
                    "Felix",
                    Deliverable::Object {
                        object: "the_red_glass".into(),
                    },
                ),
            ),
            step(
                4,
                vec![SceneChange::Attach {
                    agent: "Daniel".into(),
                    object: SMARTPHONE.into(),
                }],
                "Felix",
                "Daniel",
                "Could you pour me some cola?",
                ExpectedBehavior::help(
                    "Felix",
                    Deliverable::Substance {
                        substance: "cola".into(),
                        fresh: false,
                    },
                ),
            ),
            step(
                5,
                vec![],
                "Daniel",
                "Felix",
                "Could you give me the same, but without sugar?",
                ExpectedBehavior::help(
                    "Daniel",
                    Deliverable::Substance {
                        substance: "cola_zero".into(),
                        fresh: true,
                    },
                ),
            ),
        ],
    }
}
