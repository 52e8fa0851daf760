//! Counterexample traces: JSON-lines I/O and deterministic replay.

use std::io::{BufRead, Write};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::exec::{expand, initial_state, Expansion, FireOption, Select, VerdictKind};
use super::model::ActorModel;
use super::value::{ActorId, Time, Value};
use super::KernelError;

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "type")]
pub enum TraceAction {
    TakeMessage { message: String, arrival: Time },
    Resume,
    Delay { choice: Time },
    Choose { value: Value },
    Send { target: String, message: String },
    Assert { label: String },
    Violation { kind: VerdictKind },
}

/// One line of a counterexample. Events sharing a `step` belong to the same
/// transition.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct TraceEvent {
    pub step: u32,
    pub time: Time,
    pub actor: String,
    pub action: TraceAction,
    pub detail: String,
}

#[derive(Debug, Error)]
pub enum ReplayError {
    #[error("trace diverges at event {index}: expected {expected}, replay produced {found}")]
    Divergence {
        index: usize,
        expected: String,
        found: String,
    },
    #[error("malformed trace: {0}")]
    Malformed(String),
    #[error(transparent)]
    Kernel(#[from] KernelError),
}

#[derive(Debug, Error)]
pub enum TraceIoError {
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
    #[error("line {line}: {source}")]
    Json {
        line: usize,
        source: serde_json::Error,
    },
}

pub fn write_jsonl<W: Write>(events: &[TraceEvent], mut out: W) -> Result<(), TraceIoError> {
    for e in events {
        serde_json::to_writer(&mut out, e).map_err(|source| TraceIoError::Json { line: 0, source })?;
        out.write_all(b"\n")?;
    }
    Ok(())
}

pub fn read_jsonl<R: BufRead>(input: R) -> Result<Vec<TraceEvent>, TraceIoError> {
    let mut events = Vec::new();
    for (i, line) in input.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        events.push(
            serde_json::from_str(&line).map_err(|source| TraceIoError::Json { line: i + 1, source })?,
        );
    }
    Ok(events)
}

fn describe(e: &TraceEvent) -> String {
    format!(
        "[step {} t={} {}] {:?} {}",
        e.step, e.time, e.actor, e.action, e.detail
    )
}

/// Re-executes the recorded choices from the initial state.
///
/// Returns `Ok(true)` when the trace ends in a violation that the replay
/// reproduces (or when the trace is empty), `Ok(false)` when a non-empty trace
/// ends without any violation.
pub fn replay(model: &ActorModel, events: &[TraceEvent]) -> Result<bool, ReplayError> {
    if events.is_empty() {
        return Ok(true);
    }
    let mut state = initial_state(model)?;
    let mut start = 0;
    while start < events.len() {
        let step = events[start].step;
        let end = events[start..]
            .iter()
            .position(|e| e.step != step)
            .map_or(events.len(), |k| start + k);
        let group = &events[start..end];

        let mut picks: Vec<(ActorId, FireOption, Vec<Value>)> = Vec::new();
        for (k, e) in group.iter().enumerate() {
            let actor = || {
                model.actor_by_name(&e.actor).ok_or_else(|| {
                    ReplayError::Malformed(format!("unknown actor {} at event {}", e.actor, start + k))
                })
            };
            match &e.action {
                TraceAction::Resume => picks.push((actor()?, FireOption::Resume, Vec::new())),
                TraceAction::TakeMessage { message, arrival } => {
                    let id = actor()?;
                    let msg = model.message_id(message);
                    let idx = state
                        .actor(id)
                        .bag
                        .iter()
                        .position(|m| Some(m.msg) == msg && m.arrival == *arrival)
                        .ok_or_else(|| ReplayError::Divergence {
                            index: start + k,
                            expected: describe(e),
                            found: format!("no such message in the bag of {}", e.actor),
                        })?;
                    picks.push((id, FireOption::Take(idx as u8), Vec::new()));
                }
                TraceAction::Delay { choice } => match picks.last_mut() {
                    Some(p) => p.2.push(Value::Int(*choice)),
                    None => return Err(ReplayError::Malformed(format!("orphan delay at event {}", start + k))),
                },
                TraceAction::Choose { value } => match picks.last_mut() {
                    Some(p) => p.2.push(*value),
                    None => return Err(ReplayError::Malformed(format!("orphan choice at event {}", start + k))),
                },
                _ => {}
            }
        }
        picks.sort_by_key(|p| p.0);

        let (mut produced, next, violated) = match expand(model, &state, Select::Values(&picks), true) {
            Ok(Expansion::Next(mut succ)) if succ.len() == 1 => {
                let s = succ.pop().expect("one successor");
                (s.events, Some(s.state), false)
            }
            Ok(Expansion::Violation(_, ev)) => (ev, None, true),
            Ok(Expansion::Quiescent) => (Vec::new(), None, false),
            Ok(Expansion::Next(_)) => {
                return Err(ReplayError::Malformed("recorded step is ambiguous".into()))
            }
            Err(KernelError::Replay(msg)) => {
                return Err(ReplayError::Divergence {
                    index: start,
                    expected: describe(&group[0]),
                    found: msg,
                })
            }
            Err(e) => return Err(e.into()),
        };
        for e in &mut produced {
            e.step = step;
        }
        for k in 0..group.len().max(produced.len()) {
            match (group.get(k), produced.get(k)) {
                (Some(a), Some(b)) if a == b => {}
                (a, b) => {
                    return Err(ReplayError::Divergence {
                        index: start + k,
                        expected: a.map_or("end of step".into(), describe),
                        found: b.map_or("end of step".into(), describe),
                    })
                }
            }
        }
        if violated {
            if end != events.len() {
                return Err(ReplayError::Divergence {
                    index: end,
                    expected: describe(&events[end]),
                    found: "violation already reached".into(),
                });
            }
            return Ok(true);
        }
        match next {
            Some(s) => state = s,
            None => {
                return Err(ReplayError::Divergence {
                    index: start,
                    expected: describe(&group[0]),
                    found: "quiescent network".into(),
                })
            }
        }
        start = end;
    }
    Ok(false)
}
