#![allow(dead_code)]

pub mod verdicts;

use std::path::PathBuf;

pub fn fixture(rel: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("fixtures").join(rel)
}

/// Compares `actual` with a golden file. Run with `BLESS=1` to rewrite it.
pub fn golden(rel: &str, actual: &str) {
    let path = fixture(&format!("golden/{rel}"));
    if std::env::var_os("BLESS").is_some() {
        std::fs::create_dir_all(path.parent().unwrap()).unwrap();
        std::fs::write(&path, actual).unwrap();
        return;
    }
    let expected = std::fs::read_to_string(&path)
        .unwrap_or_else(|e| panic!("missing golden file {}: {e} (run with BLESS=1)", path.display()));
    assert_eq!(actual, expected, "golden file {} differs", path.display());
}

pub fn softdrink() -> attentive_core::Scene {
    attentive_core::Scene::load(&std::fs::read_to_string(fixture("scenes/softdrink.scene.json")).unwrap()).unwrap()
}

use attentive_core::{BoundingVolume, Vec3};

pub const ORACLE_SAMPLES: usize = 10_000;
pub const TANGENT_MARGIN: f64 = 1e-6;

/// Visibility by brute force: is any of the evenly spaced points on the
/// segment inside the box?
pub fn sampled_blocked(eye: Vec3, target: Vec3, occluder: &BoundingVolume) -> bool {
    (0..ORACLE_SAMPLES).any(|i| {
        let t = i as f64 / (ORACLE_SAMPLES - 1) as f64;
        occluder.contains(eye.lerp(target, t))
    })
}

/// True when moving the box surface by the margin in either direction
/// changes the answer, i.e. the segment grazes the box.
pub fn is_tangent(eye: Vec3, target: Vec3, occluder: &BoundingVolume) -> bool {
    occluder.inflated(TANGENT_MARGIN).intersects_segment(eye, target)
        != occluder.inflated(-TANGENT_MARGIN).intersects_segment(eye, target)
}

/// A scene with one person at `eye`, a small target at `target` and one
/// occluding box.
pub fn occlusion_scene(eye: Vec3, target: Vec3, occluder: &BoundingVolume) -> attentive_core::Scene {
    let doc = serde_json::json!({
        "objects": [
            {"id": "the_target", "center": target, "half_extents": [0.01, 0.01, 0.01], "affordances": ["graspable"]},
            {"id": "the_box", "center": occluder.center, "half_extents": occluder.half_extents, "affordances": ["occluder"]}
        ],
        "persons": [
            {"id": "Felix", "eye": eye, "gaze": [1.0, 0.0, 0.0], "reach_origin": eye, "reach_radius": 0.8}
        ]
    });
    attentive_core::Scene::load(&doc.to_string()).unwrap()
}

use proptest::prelude::*;
use serde_json::json;

/// Coordinates on a 1/1024 m grid so that translating by a multiple of
/// 1/8 m is exact in floating point.
pub fn grid(lo: f64, hi: f64) -> impl Strategy<Value = f64> {
    ((lo * 1024.0) as i32..=(hi * 1024.0) as i32).prop_map(|i| f64::from(i) / 1024.0)
}

pub fn point(x: (f64, f64), y: (f64, f64), z: (f64, f64)) -> impl Strategy<Value = [f64; 3]> {
    (grid(x.0, x.1), grid(y.0, y.1), grid(z.0, z.1)).prop_map(|(x, y, z)| [x, y, z])
}

fn object(id: &str, xy: [f64; 3], half: [f64; 3], affordances: &[&str], contents: Option<&str>) -> serde_json::Value {
    let mut o = json!({
        "id": id,
        "center": [xy[0], xy[1], half[2]],
        "half_extents": half,
        "affordances": affordances,
    });
    if let Some(c) = contents {
        o["contents"] = json!(c);
    }
    o
}

/// A random tabletop with two bottles, two glasses, a box and a phone.
pub fn arb_scene() -> impl Strategy<Value = attentive_core::Scene> {
    let spot = || point((-0.55, 0.55), (-0.45, 0.45), (0.0, 0.0));
    (
        prop::collection::vec(spot(), 6),
        prop::option::of(Just("cola")),
        point((-0.85, -0.6), (-0.2, 0.2), (0.25, 0.35)),
        point((0.6, 0.85), (-0.2, 0.2), (0.25, 0.35)),
        (grid(0.4, 0.9), grid(0.4, 0.9)),
        point((-0.2, 0.2), (0.3, 0.6), (0.25, 0.35)),
        grid(0.6, 1.1),
        any::<bool>(),
    )
        .prop_map(|(spots, glass_contents, felix, daniel, (rf, rd), robot, rr, daniel_busy)| {
            let bottle = [0.035, 0.035, 0.12];
            let glass = [0.04, 0.04, 0.06];
            let mut phone = object("the_smartphone", spots[5], [0.035, 0.07, 0.008], &["graspable", "busy_marker"], None);
            if daniel_busy {
                phone["held_by"] = json!("Daniel");
            }
            let doc = json!({
                "objects": [
                    object("the_bottle_of_cola", spots[0], bottle, &["graspable", "pourable"], Some("cola")),
                    object("the_bottle_of_fanta", spots[1], bottle, &["graspable", "pourable"], Some("fanta")),
                    object("the_red_glass", spots[2], glass, &["graspable", "container"], None),
                    object("the_blue_glass", spots[3], glass, &["graspable", "container"], glass_contents),
                    object("the_box", spots[4], [0.1, 0.12, 0.2], &["occluder"], None),
                    phone,
                ],
                "persons": [
                    {"id": "Felix", "eye": [felix[0], felix[1], felix[2] + 0.15], "gaze": [1.0, 0.0, 0.0], "reach_origin": felix, "reach_radius": rf},
                    {"id": "Daniel", "eye": [daniel[0], daniel[1], daniel[2] + 0.15], "gaze": [-1.0, 0.0, 0.0], "reach_origin": daniel, "reach_radius": rd}
                ],
                "robot": {"reach_origin": robot, "reach_radius": rr}
            });
            attentive_core::Scene::load(&doc.to_string()).expect("generated scene is valid")
        })
}

pub const SCENE_OBJECTS: [&str; 6] = [
    "the_bottle_of_cola",
    "the_bottle_of_fanta",
    "the_red_glass",
    "the_blue_glass",
    "the_box",
    "the_smartphone",
];
pub const SCENE_PERSONS: [&str; 2] = ["Felix", "Daniel"];

pub fn arb_composite() -> impl Strategy<Value = attentive_core::actions::Composite> {
    use attentive_core::actions::Composite;
    let object = prop::sample::select(SCENE_OBJECTS.to_vec());
    let person = prop::sample::select(SCENE_PERSONS.to_vec());
    prop_oneof![
        (object.clone(), person.clone()).prop_map(|(o, p)| Composite::MoveObjectToPerson {
            object: o.into(),
            person: p.into()
        }),
        (object.clone(), person).prop_map(|(o, p)| Composite::HandObjectOverToPerson {
            object: o.into(),
            person: p.into()
        }),
        (object.clone(), object).prop_map(|(s, t)| Composite::PourInto {
            source: s.into(),
            target: t.into()
        }),
    ]
}

/// Random (eye, target, occluder) triple around the table. The box is
/// centred near the segment so that roughly half the cases are blocked.
pub fn arb_occlusion() -> impl Strategy<Value = (Vec3, Vec3, BoundingVolume)> {
    (
        point((-1.0, 1.0), (-1.0, 1.0), (0.2, 0.8)),
        point((-1.0, 1.0), (-1.0, 1.0), (0.0, 0.4)),
        0.0..1.0f64,
        point((-0.25, 0.25), (-0.25, 0.25), (-0.2, 0.2)),
        point((0.02, 0.25), (0.02, 0.25), (0.02, 0.25)),
    )
        .prop_map(|(eye, target, t, jitter, half)| {
            let (eye, target) = (Vec3::from(eye), Vec3::from(target));
            let center = eye.lerp(target, t) + Vec3::from(jitter);
            (eye, target, BoundingVolume::new(center, Vec3::from(half)))
        })
}

pub fn fixed_seed_config(cases: u32, seed: u64) -> ProptestConfig {
    ProptestConfig {
        cases,
        rng_seed: proptest::test_runner::RngSeed::Fixed(seed),
        failure_persistence: None,
        max_global_rejects: cases * 10,
        ..ProptestConfig::default()
    }
}
