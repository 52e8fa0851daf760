//! Explicit-state exploration over time-shift canonical states.

use std::collections::VecDeque;
use std::time::Instant;

use indexmap::IndexSet;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::exec::{expand, Expansion, Select, StepRecord, VerdictKind, Violation};
use super::model::ActorModel;
use super::state::TimedState;
use super::trace::TraceEvent;
use super::value::Time;
use super::KernelError;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Limits {
    pub max_states: usize,
    /// States whose absolute time exceeds the horizon are not expanded.
    pub max_time_horizon: Option<Time>,
}

impl Default for Limits {
    fn default() -> Self {
        Limits {
            max_states: 5_000_000,
            max_time_horizon: None,
        }
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub enum SearchOrder {
    /// Counterexamples are minimal in transition count.
    #[default]
    Bfs,
    Dfs,
    /// Pops a uniformly random frontier entry, seeded.
    Shuffled(u64),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct ExploreOptions {
    pub limits: Limits,
    pub order: SearchOrder,
    /// Worker threads; values above one expand BFS levels in parallel.
    pub workers: usize,
}

impl Default for ExploreOptions {
    fn default() -> Self {
        ExploreOptions {
            limits: Limits::default(),
            order: SearchOrder::Bfs,
            workers: 1,
        }
    }
}

#[derive(Debug, Error)]
pub enum ExploreError {
    #[error("state limit reached after {states_explored} states")]
    StateLimit { states_explored: usize },
    #[error("time horizon reached; {states_explored} states explored")]
    HorizonReached { states_explored: usize },
    #[error(transparent)]
    Kernel(#[from] KernelError),
}

impl ExploreError {
    pub fn states_explored(&self) -> Option<usize> {
        match self {
            ExploreError::StateLimit { states_explored }
            | ExploreError::HorizonReached { states_explored } => Some(*states_explored),
            ExploreError::Kernel(_) => None,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Verdict {
    pub kind: VerdictKind,
    /// Present exactly when `kind` is a violation.
    pub trace: Option<Vec<TraceEvent>>,
    pub violation: Option<String>,
    pub states_explored: usize,
    pub peak_frontier: usize,
    pub wall_time_ms: u64,
}

/// The machine-readable verdict summary.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct VerdictSummary {
    pub kind: VerdictKind,
    pub states_explored: usize,
    pub peak_frontier: usize,
    pub wall_time_ms: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub violation: Option<String>,
}

impl Verdict {
    pub fn summary(&self) -> VerdictSummary {
        VerdictSummary {
            kind: self.kind,
            states_explored: self.states_explored,
            peak_frontier: self.peak_frontier,
            wall_time_ms: self.wall_time_ms,
            violation: self.violation.clone(),
        }
    }
}

struct Store {
    states: IndexSet<Box<[u8]>>,
    parent: Vec<u32>,
    /// Absolute time of each stored state's canonical zero.
    origin: Vec<Time>,
}

impl Store {
    fn get(&self, i: u32) -> TimedState {
        TimedState::decode(&self.states[i as usize])
    }

    fn len(&self) -> usize {
        self.states.len()
    }

    /// Returns the index when the state is new.
    fn insert(&mut self, bytes: Box<[u8]>, parent: u32, origin: Time) -> Option<u32> {
        let (j, fresh) = self.states.insert_full(bytes);
        if fresh {
            self.parent.push(parent);
            self.origin.push(origin);
            Some(j as u32)
        } else {
            None
        }
    }
}

enum Frontier {
    Fifo(VecDeque<u32>),
    Lifo(Vec<u32>),
    Random(Vec<u32>, ChaCha8Rng),
}

impl Frontier {
    fn new(order: SearchOrder) -> Self {
        match order {
            SearchOrder::Bfs => Frontier::Fifo(VecDeque::new()),
            SearchOrder::Dfs => Frontier::Lifo(Vec::new()),
            SearchOrder::Shuffled(seed) => Frontier::Random(Vec::new(), ChaCha8Rng::seed_from_u64(seed)),
        }
    }

    fn push(&mut self, i: u32) {
        match self {
            Frontier::Fifo(q) => q.push_back(i),
            Frontier::Lifo(v) | Frontier::Random(v, _) => v.push(i),
        }
    }

    fn pop(&mut self) -> Option<u32> {
        match self {
            Frontier::Fifo(q) => q.pop_front(),
            Frontier::Lifo(v) => v.pop(),
            Frontier::Random(v, rng) => {
                if v.is_empty() {
                    None
                } else {
                    let k = rng.gen_range(0..v.len());
                    Some(v.swap_remove(k))
                }
            }
        }
    }

    fn len(&self) -> usize {
        match self {
            Frontier::Fifo(q) => q.len(),
            Frontier::Lifo(v) | Frontier::Random(v, _) => v.len(),
        }
    }
}

/// Explores every reachable state of `model` from `initial`.
///
/// Returns `Schedulable` when the reachable set closes without a violation.
/// Otherwise reports a violation of the highest-ranked kind among all
/// violating states (deadline miss, then assertion failure, then queue
/// overflow). A state with a violating transition is terminal, so the set of
/// violating states, and with it the kind, does not depend on search order or
/// worker count. Under BFS (sequential or parallel) the trace is minimal
/// in transition count among traces to that kind and identical for any worker
/// count. If a limit is hit after some violation was found, that violation is
/// reported.
pub fn explore(
    model: &ActorModel,
    initial: &TimedState,
    opts: &ExploreOptions,
) -> Result<Verdict, ExploreError> {
    let started = Instant::now();
    let (root, shift) = initial.clone().canonical();
    let mut store = Store {
        states: IndexSet::new(),
        parent: Vec::new(),
        origin: Vec::new(),
    };
    store.insert(root.encode().into_boxed_slice(), u32::MAX, shift);

    let outcome = if opts.workers > 1 && opts.order == SearchOrder::Bfs {
        run_levels(model, &mut store, opts)?
    } else {
        run_sequential(model, &mut store, opts)?
    };
    let wall_time_ms = started.elapsed().as_millis() as u64;
    match outcome {
        Outcome::Closed { peak } => Ok(Verdict {
            kind: VerdictKind::Schedulable,
            trace: None,
            violation: None,
            states_explored: store.len(),
            peak_frontier: peak,
            wall_time_ms,
        }),
        Outcome::Violated { at, violation, peak } => {
            let (trace, replayed) = build_trace(model, initial, &store, at, &violation)?;
            Ok(Verdict {
                kind: replayed.kind,
                trace: Some(trace),
                violation: Some(replayed.detail),
                states_explored: store.len(),
                peak_frontier: peak,
                wall_time_ms,
            })
        }
    }
}

enum Outcome {
    Closed { peak: usize },
    Violated { at: u32, violation: Violation, peak: usize },
}

/// Violations outrank each other in this order; a deadline miss ends the
/// search at once, anything else is kept while the search goes on.
fn rank(kind: VerdictKind) -> u8 {
    match kind {
        VerdictKind::DeadlineMiss => 0,
        VerdictKind::AssertionFailure => 1,
        VerdictKind::QueueOverflow => 2,
        VerdictKind::Schedulable => 3,
    }
}

#[derive(Default)]
struct Found(Option<(u32, Violation)>);

impl Found {
    /// Keeps the violation if it outranks the current one. Returns true when
    /// nothing can outrank it.
    fn offer(&mut self, at: u32, v: Violation) -> bool {
        let better = self.0.as_ref().is_none_or(|(_, cur)| rank(v.kind) < rank(cur.kind));
        let top = rank(v.kind) == 0;
        if better {
            self.0 = Some((at, v));
        }
        top
    }

    fn finish(self, peak: usize) -> Outcome {
        let (at, violation) = self.0.expect("a violation was recorded");
        Outcome::Violated { at, violation, peak }
    }

    fn or_limit(self, peak: usize, states: usize) -> Result<Outcome, ExploreError> {
        match self.0 {
            Some(_) => Ok(self.finish(peak)),
            None => Err(ExploreError::StateLimit {
                states_explored: states,
            }),
        }
    }

    fn close(self, peak: usize, truncated: bool, states: usize) -> Result<Outcome, ExploreError> {
        match self.0 {
            Some(_) => Ok(self.finish(peak)),
            None if truncated => Err(ExploreError::HorizonReached {
                states_explored: states,
            }),
            None => Ok(Outcome::Closed { peak }),
        }
    }
}

fn beyond_horizon(store: &Store, i: u32, s: &TimedState, limits: &Limits) -> bool {
    limits
        .max_time_horizon
        .is_some_and(|h| store.origin[i as usize] + s.now > h)
}

fn run_sequential(
    model: &ActorModel,
    store: &mut Store,
    opts: &ExploreOptions,
) -> Result<Outcome, ExploreError> {
    let mut frontier = Frontier::new(opts.order);
    frontier.push(0);
    let mut peak = 1;
    let mut truncated = false;
    let mut found = Found::default();
    while let Some(i) = frontier.pop() {
        let s = store.get(i);
        if beyond_horizon(store, i, &s, &opts.limits) {
            truncated = true;
            continue;
        }
        match expand(model, &s, Select::All, false)? {
            Expansion::Quiescent => {}
            Expansion::Violation(violation, _) => {
                if found.offer(i, violation) {
                    return Ok(found.finish(peak));
                }
            }
            Expansion::Next(succs) => {
                let base = store.origin[i as usize];
                for succ in succs {
                    let (c, m) = succ.state.canonical();
                    if let Some(j) = store.insert(c.encode().into_boxed_slice(), i, base + m) {
                        if store.len() > opts.limits.max_states {
                            return found.or_limit(peak, store.len());
                        }
                        frontier.push(j);
                    }
                }
                peak = peak.max(frontier.len());
            }
        }
    }
    found.close(peak, truncated, store.len())
}

enum LevelResult {
    Skipped,
    Quiescent,
    Violation(Violation),
    Next(Vec<(Box<[u8]>, Time)>),
}

fn run_levels(
    model: &ActorModel,
    store: &mut Store,
    opts: &ExploreOptions,
) -> Result<Outcome, ExploreError> {
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(opts.workers)
        .build()
        .map_err(|e| KernelError::Model(format!("thread pool: {e}")))?;
    let mut level = vec![0u32];
    let mut peak = 1;
    let mut truncated = false;
    let mut found = Found::default();
    while !level.is_empty() {
        peak = peak.max(level.len());
        let shared: &Store = store;
        let results: Vec<Result<LevelResult, KernelError>> = pool.install(|| {
            level
                .par_iter()
                .map(|&i| {
                    let s = shared.get(i);
                    if beyond_horizon(shared, i, &s, &opts.limits) {
                        return Ok(LevelResult::Skipped);
                    }
                    Ok(match expand(model, &s, Select::All, false)? {
                        Expansion::Quiescent => LevelResult::Quiescent,
                        Expansion::Violation(v, _) => LevelResult::Violation(v),
                        Expansion::Next(succs) => LevelResult::Next(
                            succs
                                .into_iter()
                                .map(|succ| {
                                    let (c, m) = succ.state.canonical();
                                    (c.encode().into_boxed_slice(), m)
                                })
                                .collect(),
                        ),
                    })
                })
                .collect()
        });
        let mut next = Vec::new();
        for (&i, r) in level.iter().zip(results) {
            match r? {
                LevelResult::Skipped => truncated = true,
                LevelResult::Quiescent => {}
                LevelResult::Violation(violation) => {
                    if found.offer(i, violation) {
                        return Ok(found.finish(peak));
                    }
                }
                LevelResult::Next(succs) => {
                    let base = store.origin[i as usize];
                    for (bytes, m) in succs {
                        if let Some(j) = store.insert(bytes, i, base + m) {
                            if store.len() > opts.limits.max_states {
                                return found.or_limit(peak, store.len());
                            }
                            next.push(j);
                        }
                    }
                }
            }
        }
        level = next;
    }
    found.close(peak, truncated, store.len())
}

/// Recovers the transitions along the stored path and re-executes them in
/// absolute time, recording events.
fn build_trace(
    model: &ActorModel,
    initial: &TimedState,
    store: &Store,
    at: u32,
    violation: &Violation,
) -> Result<(Vec<TraceEvent>, Violation), KernelError> {
    let mut path = vec![at];
    while let Some(&p) = store.parent.get(*path.last().expect("nonempty") as usize) {
        if p == u32::MAX {
            break;
        }
        path.push(p);
    }
    path.reverse();

    let mut records: Vec<StepRecord> = Vec::with_capacity(path.len());
    for pair in path.windows(2) {
        let from = store.get(pair[0]);
        let target = &store.states[pair[1] as usize];
        let Expansion::Next(succs) = expand(model, &from, Select::All, false)? else {
            return Err(KernelError::Model("stored path is not a transition sequence".into()));
        };
        let rec = succs
            .into_iter()
            .find(|s| s.state.clone().canonicalize().encode().as_slice() == &target[..])
            .ok_or_else(|| KernelError::Model("stored successor not reproducible".into()))?
            .record;
        records.push(rec);
    }

    let mut state = initial.clone();
    let mut events = Vec::new();
    for (k, rec) in records.iter().enumerate() {
        match expand(model, &state, Select::Record(rec), true)? {
            Expansion::Next(mut succ) if succ.len() == 1 => {
                let s = succ.pop().expect("one successor");
                events.extend(s.events.into_iter().map(|mut e| {
                    e.step = k as u32;
                    e
                }));
                state = s.state;
            }
            _ => return Err(KernelError::Model("recorded transition did not replay".into())),
        }
    }
    let last = match &violation.step {
        Some(rec) => expand(model, &state, Select::Record(rec), true)?,
        None => expand(model, &state, Select::All, true)?,
    };
    match last {
        Expansion::Violation(v, ev) if v.kind == violation.kind => {
            events.extend(ev.into_iter().map(|mut e| {
                e.step = records.len() as u32;
                e
            }));
            Ok((events, v))
        }
        _ => Err(KernelError::Model("violation did not replay".into())),
    }
}

