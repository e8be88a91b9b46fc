//! Append-only JSON-lines event log and its offline replay.

use std::collections::HashMap;
use std::fs::{File, OpenOptions};
use std::io::{BufRead, BufReader, Write};
use std::path::{Path, PathBuf};
use std::sync::Mutex;

use serde::{Deserialize, Serialize};
use uuid::Uuid;

use planbench_core::curriculum::TestInstance;
use planbench_core::stats::mean;

use crate::study::{Condition, PoolItem, Tlx};
use crate::StudyError;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum EventKind {
    SessionStart {
        condition: Condition,
        instance_id: String,
        example_id: String,
    },
    FreeformSubmitted {
        text: String,
    },
    SuggestionShown {
        text: String,
    },
    SuggestionFeedback {
        correct: bool,
    },
    TranslationSubmitted {
        action_ids: Vec<usize>,
        plan: Vec<String>,
        valid: bool,
        failure_step: Option<usize>,
    },
    TlxSubmitted {
        scales: Tlx,
        load: f64,
    },
    SessionEnd,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StudyEvent {
    pub session_id: Uuid,
    /// Seconds since the Unix epoch.
    pub timestamp: f64,
    #[serde(flatten)]
    pub kind: EventKind,
}

/// Each append is a single `write` of one line under a lock.
#[derive(Debug)]
pub struct EventLog {
    path: Option<PathBuf>,
    inner: Mutex<(Option<File>, Vec<StudyEvent>)>,
}

impl EventLog {
    pub fn memory() -> Self {
        EventLog {
            path: None,
            inner: Mutex::new((None, Vec::new())),
        }
    }

    /// Opens `path` for appending; existing events are kept on disk but not loaded.
    pub fn file(path: impl Into<PathBuf>) -> Result<Self, StudyError> {
        let path = path.into();
        if let Some(dir) = path.parent() {
            std::fs::create_dir_all(dir)?;
        }
        let f = OpenOptions::new().create(true).append(true).open(&path)?;
        Ok(EventLog {
            path: Some(path),
            inner: Mutex::new((Some(f), Vec::new())),
        })
    }

    pub fn path(&self) -> Option<&Path> {
        self.path.as_deref()
    }

    pub fn append(&self, event: StudyEvent) -> Result<(), StudyError> {
        let mut guard = self.inner.lock().expect("log lock");
        if let Some(f) = guard.0.as_mut() {
            let mut line = serde_json::to_string(&event).expect("event serializes");
            line.push('\n');
            f.write_all(line.as_bytes())?;
            f.flush()?;
        }
        guard.1.push(event);
        Ok(())
    }

    /// Events appended through this handle.
    pub fn events(&self) -> Vec<StudyEvent> {
        self.inner.lock().expect("log lock").1.clone()
    }
}

pub fn read_events(path: &Path) -> Result<Vec<StudyEvent>, StudyError> {
    let mut out = Vec::new();
    for (i, line) in BufReader::new(File::open(path)?).lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        out.push(
            serde_json::from_str(&line).map_err(|e| StudyError::BadLog(format!("line {}: {e}", i + 1)))?,
        );
    }
    Ok(out)
}

#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct ReplayReport {
    pub sessions: usize,
    pub translations_checked: usize,
    pub tlx_checked: usize,
    /// Empty when every stored value was reproduced.
    pub mismatches: Vec<String>,
}

/// Recomputes translation verdicts and TLX loads from the log and checks
/// that no unassisted session was shown a suggestion.
pub fn replay(pool: &[TestInstance], events: &[StudyEvent]) -> Result<ReplayReport, StudyError> {
    let items: HashMap<&str, &TestInstance> = pool.iter().map(|t| (t.id.as_str(), t)).collect();
    let mut resolved: HashMap<String, PoolItem> = HashMap::new();
    let mut sessions: HashMap<Uuid, (Condition, String)> = HashMap::new();
    let mut report = ReplayReport::default();
    for e in events {
        match &e.kind {
            EventKind::SessionStart {
                condition, instance_id, ..
            } => {
                sessions.insert(e.session_id, (*condition, instance_id.clone()));
                report.sessions += 1;
            }
            EventKind::SuggestionShown { .. } => match sessions.get(&e.session_id) {
                Some((Condition::Assisted, _)) => {}
                _ => report.mismatches.push(format!("{}: suggestion outside assisted condition", e.session_id)),
            },
            EventKind::TranslationSubmitted {
                action_ids,
                valid,
                failure_step,
                ..
            } => {
                let Some((_, iid)) = sessions.get(&e.session_id) else {
                    report.mismatches.push(format!("{}: translation before session start", e.session_id));
                    continue;
                };
                if !resolved.contains_key(iid) {
                    let inst = items
                        .get(iid.as_str())
                        .ok_or_else(|| StudyError::BadLog(format!("instance {iid} not in pool")))?;
                    resolved.insert(iid.clone(), PoolItem::resolve((*inst).clone())?);
                }
                let item = &resolved[iid];
                report.translations_checked += 1;
                match item.plan_from_ids(action_ids) {
                    Ok(plan) => {
                        let r = planbench_core::pddl::validate(&item.problem, &plan);
                        if r.valid != *valid || r.failure_step != *failure_step {
                            report.mismatches.push(format!(
                                "{}: stored verdict ({valid}, {failure_step:?}) but replay gives ({}, {:?})",
                                e.session_id, r.valid, r.failure_step
                            ));
                        }
                    }
                    Err(err) => report.mismatches.push(format!("{}: {err}", e.session_id)),
                }
            }
            EventKind::TlxSubmitted { scales, load } => {
                report.tlx_checked += 1;
                let again = mean(&scales.values()).unwrap_or(0.0);
                if again != *load {
                    report.mismatches.push(format!("{}: stored load {load} but replay gives {again}", e.session_id));
                }
            }
            _ => {}
        }
    }
    Ok(report)
}
