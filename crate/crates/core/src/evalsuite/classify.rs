//! Predicate-based verdicts. The rules are checked in order and the first
//! one that fires decides the category.

use super::{Deliverable, ExpectedBehavior, Verdict, VerdictCategory, TRANSPORT_PREFIX};
use crate::agent::{CallStatus, InteractionTrace, Termination, TraceEvent};
use crate::tools::{is_physical_action, HAND_OBJECT_OVER_TO_PERSON, MOVE_OBJECT_TO_PERSON};
use crate::Scene;

fn verdict(category: VerdictCategory, rationale: impl Into<String>) -> Verdict {
    Verdict {
        category,
        rationale: rationale.into(),
    }
}

/// Who, if anyone, ended up with `object`: its holder, or the recipient of
/// the last successful delivery in the trace if the object is now within
/// that person's reach.
fn recipient(trace: &InteractionTrace, scene: &Scene, object: &str) -> Option<String> {
    let obj = scene.object(object).ok()?;
    if let Some(holder) = &obj.held_by {
        return Some(holder.clone());
    }
    let person = trace
        .events
        .iter()
        .filter_map(|e| match e {
            TraceEvent::ToolCall {
                call,
                status: CallStatus::Succeeded,
                ..
            } if (call.name == MOVE_OBJECT_TO_PERSON || call.name == HAND_OBJECT_OVER_TO_PERSON)
                && call.arg("object_name") == Some(object) =>
            {
                call.arg("person_name")
            }
            _ => None,
        })
        .last()?;
    scene
        .is_reachable(person, object)
        .ok()
        .filter(|&r| r)
        .map(|_| person.to_string())
}

enum Delivery {
    Satisfied,
    WrongBeneficiary(String),
    Unsatisfied(String),
}

fn check_deliverable(trace: &InteractionTrace, expected: &ExpectedBehavior, scene: &Scene) -> Delivery {
    let beneficiary = expected.beneficiary.as_str();
    let objects: Vec<String> = match &expected.deliverable {
        None => return Delivery::Satisfied,
        Some(Deliverable::Information { facts }) => {
            let said = trace.events.iter().any(|e| match e {
                TraceEvent::Speak { text, .. } => {
                    let text = text.to_lowercase();
                    facts.iter().any(|f| text.contains(&f.to_lowercase()))
                }
                _ => false,
            });
            return if said {
                Delivery::Satisfied
            } else {
                Delivery::Unsatisfied("the missing information was not given".into())
            };
        }
        Some(Deliverable::Object { object }) => vec![object.clone()],
        Some(Deliverable::Substance { substance, fresh }) => scene
            .objects()
            .filter(|o| o.fill_contents.as_deref() == Some(substance.as_str()))
            .filter(|o| !*fresh || o.fill_history.iter().all(|s| s == substance))
            .map(|o| o.id.clone())
            .collect(),
    };
    let recipients: Vec<(String, Option<String>)> = objects
        .iter()
        .map(|o| (o.clone(), recipient(trace, scene, o)))
        .collect();
    if recipients.iter().any(|(_, r)| r.as_deref() == Some(beneficiary)) {
        return Delivery::Satisfied;
    }
    if let Some((object, Some(other))) = recipients.iter().find(|(_, r)| r.is_some()) {
        return Delivery::WrongBeneficiary(format!("{object} went to {other} instead of {beneficiary}"));
    }
    Delivery::Unsatisfied(match &expected.deliverable {
        Some(Deliverable::Substance { substance, .. }) if objects.is_empty() => {
            format!("no suitable container holds {substance}")
        }
        _ => format!("nothing required reached {beneficiary}"),
    })
}

/// Classifies one terminated interaction. `final_scene` is the scene after
/// the interaction.
pub fn classify(trace: &InteractionTrace, expected: &ExpectedBehavior, final_scene: &Scene) -> Verdict {
    use VerdictCategory::*;

    if let Some(message) = trace.events.iter().find_map(|e| match e {
        TraceEvent::BackendError { message } => Some(message),
        _ => None,
    }) {
        return verdict(ExecutionError, format!("{TRANSPORT_PREFIX}{message}"));
    }

    let physical: Vec<(usize, CallStatus)> = trace
        .events
        .iter()
        .enumerate()
        .filter_map(|(i, e)| match e {
            TraceEvent::ToolCall { call, status, .. } if is_physical_action(&call.name) => Some((i, *status)),
            _ => None,
        })
        .collect();
    let first_speak = trace.events.iter().position(|e| matches!(e, TraceEvent::Speak { .. }));
    let acted = first_speak.is_some() || !physical.is_empty();

    if !expected.should_help && acted {
        return verdict(UndesiredBehavior, "acted although no help was needed");
    }
    if expected.should_help && !acted {
        return verdict(UndesiredBehavior, "did not help although help was needed");
    }
    if !expected.should_help {
        return verdict(SuccessfulSupport, "correctly stayed out of the conversation");
    }

    if !physical.is_empty() {
        if trace.termination == Termination::RoundLimit {
            return verdict(ExecutionError, "physical action attempted and the round limit was hit");
        }
        if physical.iter().all(|(_, s)| *s != CallStatus::Succeeded) {
            return verdict(ExecutionError, "every attempted physical action failed");
        }
    }

    match check_deliverable(trace, expected, final_scene) {
        Delivery::WrongBeneficiary(why) => return verdict(PartialSupport, why),
        Delivery::Unsatisfied(why) => return verdict(PartialSupport, why),
        Delivery::Satisfied => {}
    }
    if let Some(&(first_action, _)) = physical.first() {
        if first_speak.map_or(true, |s| s > first_action) {
            return verdict(PartialSupport, "no explanation before the first physical action");
        }
    }
    verdict(SuccessfulSupport, "helped the sender with an explanation first")
}
