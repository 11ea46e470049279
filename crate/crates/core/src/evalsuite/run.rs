//! Runs suites in parallel and folds the results in a fixed order.

use std::path::Path;
use std::sync::Arc;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{classify, EvalError, SituatedScenario, TestCase, Verdict};
use crate::agent::{AgentConfig, ChatBackend, PromptVariant, Session};
use crate::transcript::{transcript_path, Transcript};
use crate::Scene;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SuiteKind {
    Isolated,
    Situated,
}

pub const SITUATED_CASE_ID: &str = "situated";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunRecord {
    pub variant: PromptVariant,
    pub case_id: String,
    /// Condition name (isolated) or `stepN` (situated).
    pub stratum: String,
    pub stratum_order: u32,
    /// 1-based.
    pub repeat: u32,
    pub verdict: Verdict,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub trace_path: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunReport {
    pub kind: SuiteKind,
    pub records: Vec<RunRecord>,
}

impl RunReport {
    pub fn empty(kind: SuiteKind) -> Self {
        Self {
            kind,
            records: Vec::new(),
        }
    }

    /// Concatenates reports of the same kind (e.g. one per prompt variant).
    pub fn merge(mut self, other: RunReport) -> Self {
        self.records.extend(other.records);
        self
    }
}

fn check(repeats: u32, parallelism: usize) -> Result<(), EvalError> {
    if repeats == 0 {
        return Err(EvalError::NoRepeats);
    }
    if parallelism == 0 {
        return Err(EvalError::NoParallelism);
    }
    Ok(())
}

fn pool(parallelism: usize) -> rayon::ThreadPool {
    rayon::ThreadPoolBuilder::new()
        .num_threads(parallelism)
        .build()
        .expect("thread pool starts")
}

fn save(transcript: &Transcript, dir: Option<&Path>, variant: PromptVariant, case: &str, repeat: u32) -> Result<Option<String>, EvalError> {
    let Some(dir) = dir else { return Ok(None) };
    let path = transcript_path(dir, variant, case, repeat);
    transcript.write(&path).map_err(|e| match e {
        crate::transcript::TranscriptError::Io(io) => EvalError::Io(io),
        other => EvalError::Io(std::io::Error::other(other.to_string())),
    })?;
    Ok(Some(path.display().to_string()))
}

/// Runs every case `repeats` times, each in a fresh session.
pub fn run_isolated(
    cases: &[TestCase],
    config: &AgentConfig,
    repeats: u32,
    parallelism: usize,
    transcripts: Option<&Path>,
) -> Result<RunReport, EvalError> {
    check(repeats, parallelism)?;
    let backend = config.make_backend()?;
    let jobs: Vec<(&TestCase, u32)> = cases
        .iter()
        .flat_map(|c| (1..=repeats).map(move |r| (c, r)))
        .collect();
    let records = pool(parallelism).install(|| {
        jobs.par_iter()
            .map(|&(case, repeat)| run_case(case, repeat, config, &backend, transcripts))
            .collect::<Result<Vec<_>, _>>()
    })?;
    Ok(RunReport {
        kind: SuiteKind::Isolated,
        records,
    })
}

fn run_case(
    case: &TestCase,
    repeat: u32,
    config: &AgentConfig,
    backend: &Arc<dyn ChatBackend>,
    transcripts: Option<&Path>,
) -> Result<RunRecord, EvalError> {
    let scene = Scene::from_document(case.scene.clone()).map_err(|e| EvalError::Generation {
        case: case.id.clone(),
        detail: e.to_string(),
    })?;
    let mut session = Session::new(scene, config.clone(), backend.clone())?;
    let trace = session.run_interaction(&case.sender, &case.receiver, &case.utterance)?;
    let verdict = classify(&trace, &case.expected, &session.scene);
    let mut transcript = Transcript::new(&case.id, config.variant, repeat, &config.backend, &config.model_name);
    transcript.push_interaction(
        1,
        &case.sender,
        &case.receiver,
        &case.expected,
        &trace,
        session.scene.to_document(),
        &verdict,
    );
    Ok(RunRecord {
        variant: config.variant,
        case_id: case.id.clone(),
        stratum: case.condition.as_str().to_string(),
        stratum_order: case.condition as u32,
        repeat,
        verdict,
        trace_path: save(&transcript, transcripts, config.variant, &case.id, repeat)?,
    })
}

/// Runs the whole step sequence `repeats` times; the steps of one repeat
/// share a session.
pub fn run_situated(
    scenario: &SituatedScenario,
    config: &AgentConfig,
    repeats: u32,
    parallelism: usize,
    transcripts: Option<&Path>,
) -> Result<RunReport, EvalError> {
    check(repeats, parallelism)?;
    let backend = config.make_backend()?;
    let repeats: Vec<u32> = (1..=repeats).collect();
    let nested = pool(parallelism).install(|| {
        repeats
            .par_iter()
            .map(|&repeat| run_sequence(scenario, repeat, config, &backend, transcripts))
            .collect::<Result<Vec<_>, _>>()
    })?;
    let mut records: Vec<RunRecord> = nested.into_iter().flatten().collect();
    records.sort_by(|a, b| a.stratum_order.cmp(&b.stratum_order).then(a.repeat.cmp(&b.repeat)));
    Ok(RunReport {
        kind: SuiteKind::Situated,
        records,
    })
}

fn run_sequence(
    scenario: &SituatedScenario,
    repeat: u32,
    config: &AgentConfig,
    backend: &Arc<dyn ChatBackend>,
    transcripts: Option<&Path>,
) -> Result<Vec<RunRecord>, EvalError> {
    let fail = |detail: String| EvalError::Generation {
        case: SITUATED_CASE_ID.into(),
        detail,
    };
    let scene = Scene::from_document(scenario.scene.clone()).map_err(|e| fail(e.to_string()))?;
    let mut session = Session::new(scene, config.clone(), backend.clone())?;
    let mut transcript = Transcript::new(SITUATED_CASE_ID, config.variant, repeat, &config.backend, &config.model_name);
    let mut verdicts = Vec::new();
    for step in &scenario.steps {
        for change in &step.setup {
            // A setup that no longer applies (e.g. the phone is already
            // held) is skipped rather than aborting the sequence.
            let _ = session.scene.mutate(change);
        }
        let trace = session.run_interaction(&step.speaker, &step.listener, &step.text)?;
        let verdict = classify(&trace, &step.expected, &session.scene);
        transcript.push_interaction(
            u32::from(step.index),
            &step.speaker,
            &step.listener,
            &step.expected,
            &trace,
            session.scene.to_document(),
            &verdict,
        );
        verdicts.push((step.index, verdict));
    }
    let trace_path = save(&transcript, transcripts, config.variant, SITUATED_CASE_ID, repeat)?;
    Ok(verdicts
        .into_iter()
        .map(|(index, verdict)| RunRecord {
            variant: config.variant,
            case_id: SITUATED_CASE_ID.into(),
            stratum: format!("step{index}"),
            stratum_order: u32::from(index),
            repeat,
            verdict,
            trace_path: trace_path.clone(),
        })
        .collect())
}
