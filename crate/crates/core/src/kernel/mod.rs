//! A small timed-actor kernel: reactive classes with bounded bags, message
//! deadlines, nondeterministic delays, and an explicit-state explorer.

mod exec;
mod explore;
mod model;
pub mod program;
mod state;
mod trace;
mod value;

use thiserror::Error;

pub use exec::{
    enabled, expand, initial_state, Expansion, FireOption, Firing, Select, StepRecord, Successor,
    VerdictKind, Violation,
};
pub use explore::{
    explore, ExploreError, ExploreOptions, Limits, SearchOrder, Verdict, VerdictSummary,
};
pub use model::{ActorClass, ActorInstance, ActorModel, DeadlineRule, VarDecl};
pub use program::{dsl, Expr, Handler, HandlerBuilder, Instr, SendSpec};
pub use state::{ActorSnapshot, Continuation, MessageInstance, Payload, TimedState};
pub use trace::{read_jsonl, replay, write_jsonl, ReplayError, TraceAction, TraceEvent, TraceIoError};
pub use value::{ActorId, HandlerId, MsgId, Time, Value};

#[derive(Clone, Debug, PartialEq, Eq, Error)]
pub enum KernelError {
    #[error("model error: {0}")]
    Model(String),
    #[error("replay error: {0}")]
    Replay(String),
}
