//! Test-suite generation, verdict classification, parallel execution and
//! report aggregation.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

mod classify;
mod generate;
mod report;
mod run;

pub use classify::classify;
pub use generate::{
    generate_isolated_suite, generate_situated_scenario, isolated_case, render_template, SituatedScenario,
    SituatedStep, BUILTIN_SCENES, DISTRIBUTIONS, TEMPLATES,
};
pub use report::{emit_report, percentages, ReportFormat, ReportRow, CSV_HEADER};
pub use run::{run_isolated, run_situated, RunRecord, RunReport, SuiteKind, SITUATED_CASE_ID};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Scenario {
    Softdrink,
    Coffee,
    Dinner,
}

impl Scenario {
    pub const ALL: [Scenario; 3] = [Self::Softdrink, Self::Coffee, Self::Dinner];

    pub fn as_str(self) -> &'static str {
        match self {
            Self::Softdrink => "softdrink",
            Self::Coffee => "coffee",
            Self::Dinner => "dinner",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Condition {
    Visibility,
    Reachability,
    Busyness,
    Unobtrusive,
}

impl Condition {
    pub const ALL: [Condition; 4] = [Self::Visibility, Self::Reachability, Self::Busyness, Self::Unobtrusive];

    pub fn as_str(self) -> &'static str {
        match self {
            Self::Visibility => "visibility",
            Self::Reachability => "reachability",
            Self::Busyness => "busyness",
            Self::Unobtrusive => "unobtrusive",
        }
    }
}

impl fmt::Display for Condition {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// What has to end up with the beneficiary for the help to count as complete.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Deliverable {
    Object {
        object: String,
    },
    /// A container holding `substance`. With `fresh`, the container must not
    /// have held anything else before.
    Substance {
        substance: String,
        fresh: bool,
    },
    /// A spoken statement containing at least one of the facts
    /// (case-insensitive substring).
    Information {
        facts: Vec<String>,
    },
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ExpectedBehavior {
    pub should_help: bool,
    pub beneficiary: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub deliverable: Option<Deliverable>,
    /// Queries are never counted as acting.
    #[serde(default = "yes")]
    pub allow_queries: bool,
}

fn yes() -> bool {
    true
}

impl ExpectedBehavior {
    pub fn no_help(beneficiary: &str) -> Self {
        Self {
            should_help: false,
            beneficiary: beneficiary.into(),
            deliverable: None,
            allow_queries: true,
        }
    }

    pub fn help(beneficiary: &str, deliverable: Deliverable) -> Self {
        Self {
            should_help: true,
            beneficiary: beneficiary.into(),
            deliverable: Some(deliverable),
            allow_queries: true,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TestCase {
    pub id: String,
    pub scenario: Scenario,
    pub distribution_index: u8,
    pub utterance_template_index: u8,
    pub condition: Condition,
    pub target_object: String,
    pub sender: String,
    pub receiver: String,
    pub utterance: String,
    pub expected: ExpectedBehavior,
    /// The scene with the condition already set up.
    pub scene: crate::SceneDocument,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum VerdictCategory {
    SuccessfulSupport,
    PartialSupport,
    ExecutionError,
    UndesiredBehavior,
}

impl VerdictCategory {
    pub const ALL: [VerdictCategory; 4] = [
        Self::SuccessfulSupport,
        Self::PartialSupport,
        Self::ExecutionError,
        Self::UndesiredBehavior,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Self::SuccessfulSupport => "successful_support",
            Self::PartialSupport => "partial_support",
            Self::ExecutionError => "execution_error",
            Self::UndesiredBehavior => "undesired_behavior",
        }
    }
}

impl fmt::Display for VerdictCategory {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for VerdictCategory {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Self::ALL
            .into_iter()
            .find(|v| v.as_str() == s)
            .ok_or_else(|| format!("unknown verdict `{s}`"))
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Verdict {
    pub category: VerdictCategory,
    pub rationale: String,
}

/// Rationale prefix for interactions cut short by a backend failure.
pub const TRANSPORT_PREFIX: &str = "transport: ";

impl Verdict {
    pub fn is_transport_failure(&self) -> bool {
        self.category == VerdictCategory::ExecutionError && self.rationale.starts_with(TRANSPORT_PREFIX)
    }
}

#[derive(Debug, Error)]
pub enum EvalError {
    #[error("repeats must be at least 1")]
    NoRepeats,
    #[error("parallelism must be at least 1")]
    NoParallelism,
    #[error("case {case}: {detail}")]
    Generation { case: String, detail: String },
    #[error("fixture {name} is invalid: {detail}")]
    Fixture { name: String, detail: String },
    #[error("unknown report format `{0}` (expected csv or json)")]
    UnknownFormat(String),
    #[error(transparent)]
    Agent(#[from] crate::agent::AgentError),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}
