use std::sync::Arc;

use attentive_core::agent::{AgentConfig, InteractionTrace, Script, ScriptedBackend, Session};
use attentive_core::evalsuite::{Deliverable, ExpectedBehavior, VerdictCategory};
use attentive_core::Scene;

use super::softdrink;
use VerdictCategory::*;

type Round = Vec<(&'static str, Vec<(&'static str, &'static str)>)>;

pub struct Fixture {
    pub name: &'static str,
    pub trace: InteractionTrace,
    pub scene: Scene,
    pub expected: ExpectedBehavior,
    pub verdict: VerdictCategory,
}

fn run(scene: Scene, rounds: Vec<Round>, repeat_last: bool, max_rounds: u32) -> (InteractionTrace, Scene) {
    let config = AgentConfig {
        max_tool_rounds: max_rounds,
        ..AgentConfig::default()
    };
    let backend = Arc::new(ScriptedBackend::new(Script::single(rounds, repeat_last)));
    let mut s = Session::new(scene, config, backend).unwrap();
    let t = s.run_interaction("Felix", "Daniel", "Daniel, could you hand me the red glass?").unwrap();
    (t, s.scene)
}

fn one(name: &'static str, args: &[(&'static str, &'static str)]) -> Round {
    vec![(name, args.to_vec())]
}

fn stop() -> Round {
    one("stop", &[])
}

fn speak(text: &'static str) -> Round {
    one("speak", &[("person_name", "Felix"), ("text", text)])
}

fn hand(object: &'static str, person: &'static str) -> Round {
    one("hand_object_over_to_person", &[("object_name", object), ("person_name", person)])
}

fn pour(source: &'static str, target: &'static str) -> Round {
    one("pour_into", &[("source_container_name", source), ("target_container_name", target)])
}

fn check(object: &'static str) -> Round {
    one("check_hindering_reasons", &[("person_name", "Daniel"), ("object_name", object)])
}

fn red_glass() -> ExpectedBehavior {
    ExpectedBehavior::help(
        "Felix",
        Deliverable::Object {
            object: "the_red_glass".into(),
        },
    )
}

fn cola_for_felix() -> ExpectedBehavior {
    ExpectedBehavior::help(
        "Felix",
        Deliverable::Substance {
            substance: "cola".into(),
            fresh: false,
        },
    )
}

fn cola_zero_info() -> ExpectedBehavior {
    ExpectedBehavior::help(
        "Daniel",
        Deliverable::Information {
            facts: vec!["cola zero".into()],
        },
    )
}

/// The softdrink scene with the red glass moved out of the way of the blue one.
fn clear_scene() -> Scene {
    let mut s = softdrink();
    s.mutate(&attentive_core::SceneChange::MoveObject {
        object: "the_red_glass".into(),
        center: attentive_core::Vec3::new(-0.3, 0.05, 0.06),
    })
    .unwrap();
    s
}

fn fixture(
    name: &'static str,
    scene: Scene,
    rounds: Vec<Round>,
    expected: ExpectedBehavior,
    verdict: VerdictCategory,
) -> Fixture {
    let (trace, scene) = run(scene, rounds, false, 10);
    Fixture {
        name,
        trace,
        scene,
        expected,
        verdict,
    }
}

pub fn fixtures() -> Vec<Fixture> {
    let mut out = vec![
        // successful_support
        fixture("unobtrusive check then stop", softdrink(), vec![check("the_bottle_of_fanta"), stop()], ExpectedBehavior::no_help("Felix"), SuccessfulSupport),
        fixture("stop only when not needed", softdrink(), vec![stop()], ExpectedBehavior::no_help("Felix"), SuccessfulSupport),
        fixture(
            "explain then hand over",
            softdrink(),
            vec![check("the_red_glass"), speak("Daniel cannot reach the red glass."), hand("the_red_glass", "Felix"), stop()],
            red_glass(),
            SuccessfulSupport,
        ),
        fixture(
            "correcting missing information",
            softdrink(),
            vec![one("get_objects", &[]), speak("There is also cola zero on the table."), stop()],
            cola_zero_info(),
            SuccessfulSupport,
        ),
        fixture(
            "pour and deliver",
            clear_scene(),
            vec![
                speak("Daniel is busy, I will pour."),
                pour("the_bottle_of_cola", "the_blue_glass"),
                hand("the_blue_glass", "Felix"),
                stop(),
            ],
            cola_for_felix(),
            SuccessfulSupport,
        ),
        // partial_support
        fixture(
            "explanation only after acting",
            softdrink(),
            vec![hand("the_red_glass", "Felix"), speak("I handed you the red glass."), stop()],
            red_glass(),
            PartialSupport,
        ),
        fixture(
            "delivered to the receiver instead of the sender",
            softdrink(),
            vec![speak("Here you go."), hand("the_red_glass", "Daniel"), stop()],
            red_glass(),
            PartialSupport,
        ),
        fixture(
            "poured but not delivered",
            clear_scene(),
            vec![speak("I will pour."), pour("the_bottle_of_cola", "the_blue_glass"), stop()],
            cola_for_felix(),
            PartialSupport,
        ),
        fixture(
            "wrong correction",
            softdrink(),
            vec![speak("There is also water on the table."), stop()],
            cola_zero_info(),
            PartialSupport,
        ),
        // execution_error
        fixture(
            "the only action failed",
            softdrink(),
            vec![speak("Let me get the box."), hand("the_box", "Felix"), stop()],
            red_glass(),
            ExecutionError,
        ),
        fixture(
            "action on a misnamed object",
            softdrink(),
            vec![speak("Here is the glass."), hand("the_glass", "Felix"), stop()],
            red_glass(),
            ExecutionError,
        ),
        fixture(
            "backend gives up mid interaction",
            softdrink(),
            vec![speak("One moment.")],
            red_glass(),
            ExecutionError,
        ),
        // undesired_behavior
        fixture(
            "speaking although not needed",
            softdrink(),
            vec![speak("Daniel can reach it."), stop()],
            ExpectedBehavior::no_help("Felix"),
            UndesiredBehavior,
        ),
        fixture(
            "acting although not needed",
            softdrink(),
            vec![hand("the_bottle_of_fanta", "Felix"), stop()],
            ExpectedBehavior::no_help("Felix"),
            UndesiredBehavior,
        ),
        fixture("queries only when help was needed", softdrink(), vec![check("the_red_glass"), stop()], red_glass(), UndesiredBehavior),
        fixture("silent when help was needed", softdrink(), vec![stop()], red_glass(), UndesiredBehavior),
    ];

    let (trace, scene) = run(
        softdrink(),
        vec![speak("I will pour it."), pour("the_bottle_of_cola_zero", "the_box")],
        true,
        10,
    );
    out.push(Fixture {
        name: "stuck repeating a failing pour",
        trace,
        scene,
        expected: cola_for_felix(),
        verdict: ExecutionError,
    });
    out
}
