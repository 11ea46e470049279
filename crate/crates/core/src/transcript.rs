//! Line-delimited JSON transcripts of evaluation runs.
//!
//! One file per run, one record per line. Every file starts with a `header`
//! record; each interaction then contributes an `interaction` record, its
//! `event` records in order, an `end` record, a `final_scene` record and a
//! `verdict` record, all tagged with the interaction index (1-based).
//! Replaying a transcript reclassifies it without calling any backend.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::agent::{BackendSpec, InteractionTrace, PromptVariant, Termination, TraceEvent};
use crate::evalsuite::{ExpectedBehavior, Verdict};
use crate::SceneDocument;

pub const TRACE_EXTENSION: &str = "trace";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "record", rename_all = "snake_case")]
pub enum TranscriptRecord {
    Header {
        case_id: String,
        variant: PromptVariant,
        repeat: u32,
        backend: BackendSpec,
        model_name: String,
    },
    Interaction {
        index: u32,
        speaker: String,
        listener: String,
        utterance: String,
        expected: ExpectedBehavior,
    },
    Event {
        index: u32,
        event: TraceEvent,
    },
    End {
        index: u32,
        termination: Termination,
        rounds: u32,
    },
    FinalScene {
        index: u32,
        scene: SceneDocument,
    },
    Verdict {
        index: u32,
        verdict: Verdict,
    },
}

#[derive(Debug, Error)]
pub enum TranscriptError {
    #[error("line {line}: {source}")]
    Parse { line: usize, source: serde_json::Error },
    #[error("transcript does not start with a header record")]
    MissingHeader,
    #[error("interaction {0} is incomplete")]
    Incomplete(u32),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// One interaction read back from a transcript.
#[derive(Debug, Clone, PartialEq)]
pub struct RecordedInteraction {
    pub index: u32,
    pub speaker: String,
    pub listener: String,
    pub expected: ExpectedBehavior,
    pub trace: InteractionTrace,
    pub final_scene: SceneDocument,
    pub verdict: Option<Verdict>,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct Transcript {
    pub records: Vec<TranscriptRecord>,
}

impl Transcript {
    pub fn new(case_id: &str, variant: PromptVariant, repeat: u32, backend: &BackendSpec, model_name: &str) -> Self {
        Self {
            records: vec![TranscriptRecord::Header {
                case_id: case_id.into(),
                variant,
                repeat,
                backend: backend.clone(),
                model_name: model_name.into(),
            }],
        }
    }

    #[allow(clippy::too_many_arguments)]
    pub fn push_interaction(
        &mut self,
        index: u32,
        speaker: &str,
        listener: &str,
        expected: &ExpectedBehavior,
        trace: &InteractionTrace,
        final_scene: SceneDocument,
        verdict: &Verdict,
    ) {
        self.records.push(TranscriptRecord::Interaction {
            index,
            speaker: speaker.into(),
            listener: listener.into(),
            utterance: trace.input_utterance.clone(),
            expected: expected.clone(),
        });
        self.records.extend(trace.events.iter().map(|event| TranscriptRecord::Event {
            index,
            event: event.clone(),
        }));
        self.records.push(TranscriptRecord::End {
            index,
            termination: trace.termination,
            rounds: trace.rounds,
        });
        self.records.push(TranscriptRecord::FinalScene {
            index,
            scene: final_scene,
        });
        self.records.push(TranscriptRecord::Verdict {
            index,
            verdict: verdict.clone(),
        });
    }

    pub fn to_jsonl(&self) -> String {
        let mut out = String::new();
        for r in &self.records {
            out.push_str(&serde_json::to_string(r).expect("transcript records serialize"));
            out.push('\n');
        }
        out
    }

    pub fn parse(text: &str) -> Result<Self, TranscriptError> {
        let records = text
            .lines()
            .enumerate()
            .filter(|(_, l)| !l.trim().is_empty())
            .map(|(i, l)| serde_json::from_str(l).map_err(|source| TranscriptError::Parse { line: i + 1, source }))
            .collect::<Result<Vec<_>, _>>()?;
        if !matches!(records.first(), Some(TranscriptRecord::Header { .. })) {
            return Err(TranscriptError::MissingHeader);
        }
        Ok(Self { records })
    }

    pub fn read(path: &Path) -> Result<Self, TranscriptError> {
        Self::parse(&std::fs::read_to_string(path)?)
    }

    pub fn write(&self, path: &Path) -> Result<(), TranscriptError> {
        if let Some(dir) = path.parent() {
            std::fs::create_dir_all(dir)?;
        }
        std::fs::write(path, self.to_jsonl())?;
        Ok(())
    }

    pub fn interactions(&self) -> Result<Vec<RecordedInteraction>, TranscriptError> {
        struct Partial {
            index: u32,
            speaker: String,
            listener: String,
            utterance: String,
            expected: ExpectedBehavior,
            events: Vec<TraceEvent>,
            end: Option<(Termination, u32)>,
            scene: Option<SceneDocument>,
            verdict: Option<Verdict>,
        }
        let mut partials: Vec<Partial> = Vec::new();
        for record in &self.records {
            match record {
                TranscriptRecord::Header { .. } => {}
                TranscriptRecord::Interaction {
                    index,
                    speaker,
                    listener,
                    utterance,
                    expected,
                } => partials.push(Partial {
                    index: *index,
                    speaker: speaker.clone(),
                    listener: listener.clone(),
                    utterance: utterance.clone(),
                    expected: expected.clone(),
                    events: Vec::new(),
                    end: None,
                    scene: None,
                    verdict: None,
                }),
                TranscriptRecord::Event { index, event } => {
                    let p = find(&mut partials, *index)?;
                    p.events.push(event.clone());
                }
                TranscriptRecord::End {
                    index,
                    termination,
                    rounds,
                } => find(&mut partials, *index)?.end = Some((*termination, *rounds)),
                TranscriptRecord::FinalScene { index, scene } => find(&mut partials, *index)?.scene = Some(scene.clone()),
                TranscriptRecord::Verdict { index, verdict } => {
                    find(&mut partials, *index)?.verdict = Some(verdict.clone())
                }
            }
        }
        fn find(partials: &mut [Partial], index: u32) -> Result<&mut Partial, TranscriptError> {
            partials
                .iter_mut()
                .rev()
                .find(|p| p.index == index)
                .ok_or(TranscriptError::Incomplete(index))
        }
        partials
            .into_iter()
            .map(|p| {
                let (termination, rounds) = p.end.ok_or(TranscriptError::Incomplete(p.index))?;
                Ok(RecordedInteraction {
                    index: p.index,
                    speaker: p.speaker,
                    listener: p.listener,
                    expected: p.expected,
                    trace: InteractionTrace {
                        input_utterance: p.utterance,
                        events: p.events,
                        termination,
                        rounds,
                    },
                    final_scene: p.scene.ok_or(TranscriptError::Incomplete(p.index))?,
                    verdict: p.verdict,
                })
            })
            .collect()
    }
}

/// `<root>/<variant>/<case_id>/<repeat>.trace`
pub fn transcript_path(root: &Path, variant: PromptVariant, case_id: &str, repeat: u32) -> PathBuf {
    root.join(variant.as_str())
        .join(case_id)
        .join(format!("{repeat}.{TRACE_EXTENSION}"))
}
