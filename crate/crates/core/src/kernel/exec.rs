//! Handler execution and the timed transition relation.
//!
//! One transition advances time to the next event and lets every enabled
//! actor perform one action: resume its suspended handler, or take the
//! earliest message from its bag. Actors that fire together do not observe
//! each other's sends until the following transition. Nondeterminism comes
//! from choice sets (`delay`, nondeterministic assignment) and from ties
//! between equally early messages; the successor set is the product of all
//! of them.

use serde::{Deserialize, Serialize};
use smallvec::{smallvec, SmallVec};

use super::model::ActorModel;
use super::program::{BinOp, Expr, Instr};
use super::state::{Continuation, MessageInstance, Payload, TimedState};
use super::trace::{TraceAction, TraceEvent};
use super::value::{ActorId, HandlerId, Time, Value};
use super::KernelError;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum FireOption {
    Resume,
    /// Index into the actor's sorted bag.
    Take(u8),
}

#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Firing {
    pub actor: ActorId,
    pub option: FireOption,
    /// Indices into each choice set met while running, in order.
    pub choices: SmallVec<[u8; 4]>,
}

/// The choices that identify one transition out of a state.
#[derive(Clone, Debug, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct StepRecord {
    pub firings: SmallVec<[Firing; 3]>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum VerdictKind {
    Schedulable,
    DeadlineMiss,
    AssertionFailure,
    QueueOverflow,
}

impl VerdictKind {
    pub fn is_violation(self) -> bool {
        self != VerdictKind::Schedulable
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Violation {
    pub kind: VerdictKind,
    pub time: Time,
    pub actor: ActorId,
    pub detail: String,
    /// Absent for deadline misses, which are detected while advancing time.
    pub step: Option<StepRecord>,
}

/// How choices are resolved while running a handler.
#[derive(Clone, Copy, Debug)]
pub enum Forced<'a> {
    /// Explore every option.
    All,
    /// Follow recorded option indices.
    Index(&'a [u8]),
    /// Follow recorded option values (used when replaying a textual trace).
    Value(&'a [Value]),
}

impl Forced<'_> {
    fn is_all(&self) -> bool {
        matches!(self, Forced::All)
    }
}

/// What a single actor does in one transition.
#[derive(Clone, Debug)]
struct Branch {
    vars: Vec<Value>,
    cont: Option<Continuation>,
    sends: Vec<(ActorId, MessageInstance)>,
    choices: SmallVec<[u8; 4]>,
    fault: Option<String>,
    events: Vec<TraceEvent>,
}

struct Frame {
    handler: HandlerId,
    pc: usize,
    locals: SmallVec<[Value; 4]>,
    params: Payload,
    sender: ActorId,
    served_arrival: Time,
}

#[derive(Clone)]
struct Partial {
    vars: Vec<Value>,
    pc: usize,
    locals: SmallVec<[Value; 4]>,
    sends: Vec<(ActorId, MessageInstance)>,
    choices: SmallVec<[u8; 4]>,
    events: Vec<TraceEvent>,
}

struct Runner<'a> {
    model: &'a ActorModel,
    actor: ActorId,
    now: Time,
    frame: &'a Frame,
    body: &'a [Instr],
    handler_name: &'a str,
    record: bool,
}

impl Runner<'_> {
    fn err(&self, what: impl std::fmt::Display) -> KernelError {
        KernelError::Model(format!(
            "{}.{}: {what}",
            self.model.actor_name(self.actor),
            self.handler_name
        ))
    }

    fn replay_err(&self, what: impl std::fmt::Display) -> KernelError {
        KernelError::Replay(format!(
            "{}.{} at {}: {what}",
            self.model.actor_name(self.actor),
            self.handler_name,
            self.now
        ))
    }

    fn eval(&self, p: &Partial, e: &Expr) -> Result<Value, KernelError> {
        Ok(match e {
            Expr::Const(v) => *v,
            Expr::Var(s) => p.vars[s.0 as usize],
            Expr::Local(l) => *p
                .locals
                .get(l.0 as usize)
                .ok_or_else(|| self.err(format!("local {} out of range", l.0)))?,
            Expr::Param(i) => *self
                .frame
                .params
                .get(*i as usize)
                .ok_or_else(|| self.err(format!("parameter {i} missing")))?,
            Expr::Sender => Value::Actor(self.frame.sender),
            Expr::SelfRef => Value::Actor(self.actor),
            Expr::WaitingTime => Value::Int(self.now - self.frame.served_arrival),
            Expr::Not(a) => Value::Bool(!self.eval_bool(p, a)?),
            Expr::Bin(op, a, b) => {
                let x = self.eval(p, a)?;
                let y = self.eval(p, b)?;
                match op {
                    BinOp::Eq => Value::Bool(x == y),
                    BinOp::Ne => Value::Bool(x != y),
                    BinOp::And | BinOp::Or => {
                        let (x, y) = match (x.as_bool(), y.as_bool()) {
                            (Some(x), Some(y)) => (x, y),
                            _ => return Err(self.err(format!("{op:?} on {x} and {y}"))),
                        };
                        Value::Bool(if *op == BinOp::And { x && y } else { x || y })
                    }
                    _ => {
                        let (x, y) = match (x.as_int(), y.as_int()) {
                            (Some(x), Some(y)) => (x, y),
                            _ => return Err(self.err(format!("{op:?} on {x} and {y}"))),
                        };
                        match op {
                            BinOp::Add => Value::Int(x + y),
                            BinOp::Sub => Value::Int(x - y),
                            BinOp::Mul => Value::Int(x * y),
                            BinOp::Lt => Value::Bool(x < y),
                            BinOp::Le => Value::Bool(x <= y),
                            BinOp::Gt => Value::Bool(x > y),
                            BinOp::Ge => Value::Bool(x >= y),
                            _ => unreachable!(),
                        }
                    }
                }
            }
        })
    }

    fn eval_bool(&self, p: &Partial, e: &Expr) -> Result<bool, KernelError> {
        let v = self.eval(p, e)?;
        v.as_bool()
            .ok_or_else(|| self.err(format!("expected boolean, got {v}")))
    }

    fn eval_int(&self, p: &Partial, e: &Expr) -> Result<i64, KernelError> {
        let v = self.eval(p, e)?;
        v.as_int()
            .ok_or_else(|| self.err(format!("expected integer, got {v}")))
    }

    fn event(&self, p: &mut Partial, action: TraceAction, detail: String) {
        if self.record {
            p.events.push(TraceEvent {
                step: 0,
                time: self.now,
                actor: self.model.actor_name(self.actor).to_string(),
                action,
                detail,
            });
        }
    }

    /// Picks the option indices to follow at a choice point.
    fn pick(
        &self,
        p: &Partial,
        options: &[Value],
        forced: Forced<'_>,
    ) -> Result<SmallVec<[usize; 8]>, KernelError> {
        let k = p.choices.len();
        match forced {
            Forced::All => Ok((0..options.len()).collect()),
            Forced::Index(ix) => {
                let i = *ix
                    .get(k)
                    .ok_or_else(|| self.replay_err("recorded choices exhausted"))?
                    as usize;
                if i >= options.len() {
                    return Err(self.replay_err(format!("recorded choice {i} out of range")));
                }
                Ok(smallvec![i])
            }
            Forced::Value(vals) => {
                let want = vals
                    .get(k)
                    .ok_or_else(|| self.replay_err("recorded choices exhausted"))?;
                let i = options
                    .iter()
                    .position(|o| o == want)
                    .ok_or_else(|| {
                        self.replay_err(format!("recorded choice {want} is not an option"))
                    })?;
                Ok(smallvec![i])
            }
        }
    }

    fn run(
        &self,
        vars: Vec<Value>,
        forced: Forced<'_>,
    ) -> Result<Vec<Branch>, KernelError> {
        let body = self.body;
        let mut out = Vec::new();
        let mut stack = vec![Partial {
            vars,
            pc: self.frame.pc,
            locals: self.frame.locals.clone(),
            sends: Vec::new(),
            choices: SmallVec::new(),
            events: Vec::new(),
        }];
        'paths: while let Some(mut p) = stack.pop() {
            loop {
                let Some(instr) = body.get(p.pc) else {
                    out.push(self.finish(p, None, None));
                    continue 'paths;
                };
                match instr {
                    Instr::SetVar(slot, e) => {
                        p.vars[slot.0 as usize] = self.eval(&p, e)?;
                        p.pc += 1;
                    }
                    Instr::SetLocal(slot, e) => {
                        let v = self.eval(&p, e)?;
                        let i = slot.0 as usize;
                        if p.locals.len() <= i {
                            p.locals.resize(i + 1, Value::Null);
                        }
                        p.locals[i] = v;
                        p.pc += 1;
                    }
                    Instr::Choose(_, opts) | Instr::Delay(opts) => {
                        let values = opts
                            .iter()
                            .map(|o| self.eval(&p, o))
                            .collect::<Result<Vec<_>, _>>()?;
                        let picks = self.pick(&p, &values, forced)?;
                        for &i in picks.iter().skip(1).rev() {
                            let mut q = p.clone();
                            q.choices.push(i as u8);
                            if let Some(c) = self.apply_choice(&mut q, instr, values[i])? {
                                out.push(c);
                            } else {
                                stack.push(q);
                            }
                        }
                        p.choices.push(picks[0] as u8);
                        if let Some(c) = self.apply_choice(&mut p, instr, values[picks[0]])? {
                            out.push(c);
                            continue 'paths;
                        }
                    }
                    Instr::Send(spec) => {
                        let target = self.eval(&p, &spec.target)?;
                        let target = target
                            .as_actor()
                            .ok_or_else(|| self.err(format!("send {} to {target}", spec.message)))?;
                        let msg = spec.msg_id.expect("message ids are resolved at model build");
                        if self.model.handler_for(target, msg).is_none() {
                            return Err(self.err(format!(
                                "{} cannot handle {}",
                                self.model.actor_name(target),
                                spec.message
                            )));
                        }
                        let args = spec
                            .args
                            .iter()
                            .map(|a| self.eval(&p, a))
                            .collect::<Result<Payload, _>>()?;
                        let after = match &spec.after {
                            Some(e) => self.eval_int(&p, e)?,
                            None => 0,
                        };
                        if after < 0 {
                            return Err(self.err(format!("negative after({after})")));
                        }
                        let deadline = match &spec.deadline {
                            Some(e) => Some(self.now + self.eval_int(&p, e)?),
                            None => None,
                        };
                        let m = MessageInstance {
                            arrival: self.now + after,
                            deadline,
                            msg,
                            args,
                            sender: self.actor,
                            send_time: self.now,
                        };
                        if self.record {
                            let detail = format!(
                                "{}.{}({}) arrival {}{}",
                                self.model.actor_name(target),
                                spec.message,
                                join(&m.args),
                                m.arrival,
                                m.deadline
                                    .map(|d| format!(" deadline {d}"))
                                    .unwrap_or_default()
                            );
                            self.event(
                                &mut p,
                                TraceAction::Send {
                                    target: self.model.actor_name(target).to_string(),
                                    message: spec.message.clone(),
                                },
                                detail,
                            );
                        }
                        p.sends.push((target, m));
                        p.pc += 1;
                    }
                    Instr::Assert(cond, label) => {
                        if self.eval_bool(&p, cond)? {
                            self.event(
                                &mut p,
                                TraceAction::Assert {
                                    label: label.clone(),
                                },
                                "holds".into(),
                            );
                            p.pc += 1;
                        } else {
                            out.push(self.finish(p, None, Some(label.clone())));
                            continue 'paths;
                        }
                    }
                    Instr::JumpUnless(cond, target) => {
                        p.pc = if self.eval_bool(&p, cond)? {
                            p.pc + 1
                        } else {
                            *target
                        };
                    }
                    Instr::Jump(target) => p.pc = *target,
                }
            }
        }
        Ok(out)
    }

    /// Applies the chosen option; returns a finished branch when the handler
    /// suspends.
    fn apply_choice(
        &self,
        p: &mut Partial,
        instr: &Instr,
        value: Value,
    ) -> Result<Option<Branch>, KernelError> {
        match instr {
            Instr::Choose(slot, _) => {
                let i = slot.0 as usize;
                if p.locals.len() <= i {
                    p.locals.resize(i + 1, Value::Null);
                }
                p.locals[i] = value;
                self.event(p, TraceAction::Choose { value }, String::new());
                p.pc += 1;
                Ok(None)
            }
            Instr::Delay(_) => {
                let d = value
                    .as_int()
                    .ok_or_else(|| self.err(format!("delay by {value}")))?;
                if d < 0 {
                    return Err(self.err(format!("negative delay({d})")));
                }
                self.event(p, TraceAction::Delay { choice: d }, String::new());
                p.pc += 1;
                if d == 0 {
                    return Ok(None);
                }
                let cont = Continuation {
                    resume_at: self.now + d,
                    handler: self.frame.handler,
                    pc: p.pc as u16,
                    locals: p.locals.clone(),
                    params: self.frame.params.clone(),
                    sender: self.frame.sender,
                    served_arrival: self.frame.served_arrival,
                };
                let done = std::mem::replace(
                    p,
                    Partial {
                        vars: Vec::new(),
                        pc: 0,
                        locals: SmallVec::new(),
                        sends: Vec::new(),
                        choices: SmallVec::new(),
                        events: Vec::new(),
                    },
                );
                Ok(Some(self.finish(done, Some(cont), None)))
            }
            _ => unreachable!(),
        }
    }

    fn finish(&self, p: Partial, cont: Option<Continuation>, fault: Option<String>) -> Branch {
        Branch {
            vars: p.vars,
            cont,
            sends: p.sends,
            choices: p.choices,
            fault,
            events: p.events,
        }
    }
}

fn join(vals: &[Value]) -> String {
    vals.iter()
        .map(|v| v.to_string())
        .collect::<Vec<_>>()
        .join(", ")
}

/// Builds the time-zero state: default valuations, then every constructor in
/// instance order.
pub fn initial_state(model: &ActorModel) -> Result<TimedState, KernelError> {
    let mut state = TimedState {
        now: 0,
        actors: model
            .actor_ids()
            .map(|a| super::state::ActorSnapshot {
                vars: model.initial_vars(a),
                cont: None,
                bag: Vec::new(),
            })
            .collect(),
    };
    for actor in model.actor_ids() {
        let Some(ctor) = &model.class_of(actor).constructor else {
            continue;
        };
        let frame = Frame {
            handler: HandlerId(u16::MAX),
            pc: 0,
            locals: SmallVec::new(),
            params: SmallVec::new(),
            sender: actor,
            served_arrival: 0,
        };
        let runner = Runner {
            model,
            actor,
            now: 0,
            frame: &frame,
            body: &ctor.body,
            handler_name: &ctor.name,
            record: false,
        };
        let mut branches = runner.run(state.actor(actor).vars.clone(), Forced::All)?;
        let branch = match (branches.pop(), branches.is_empty()) {
            (Some(b), true) if b.cont.is_none() && b.fault.is_none() => b,
            _ => {
                return Err(runner.err("constructors must be deterministic, delay-free and assertion-safe"))
            }
        };
        state.actor_mut(actor).vars = branch.vars;
        for (target, m) in branch.sends {
            let cap = model.capacity(target);
            let snap = state.actor_mut(target);
            snap.enqueue(m);
            if snap.bag.len() > cap {
                return Err(KernelError::Model(format!(
                    "initial messages overflow {}",
                    model.actor_name(target)
                )));
            }
        }
    }
    Ok(state)
}

/// Result of expanding one state.
#[derive(Debug)]
pub enum Expansion {
    /// No pending work remains.
    Quiescent,
    Next(Vec<Successor>),
    Violation(Violation, Vec<TraceEvent>),
}

#[derive(Debug)]
pub struct Successor {
    pub record: StepRecord,
    pub state: TimedState,
    pub events: Vec<TraceEvent>,
}

/// Selects which transitions to compute.
#[derive(Clone, Copy, Debug)]
pub enum Select<'a> {
    All,
    Record(&'a StepRecord),
    /// Per firing actor: option plus recorded choice values.
    Values(&'a [(ActorId, FireOption, Vec<Value>)]),
}

/// The actors that may act at the state's next event time, with their options.
pub fn enabled(state: &TimedState, at: Time) -> Vec<(ActorId, SmallVec<[FireOption; 2]>)> {
    let mut out = Vec::new();
    for (i, a) in state.actors.iter().enumerate() {
        let id = ActorId(i as u16);
        match &a.cont {
            Some(c) => {
                if c.resume_at <= at {
                    out.push((id, smallvec![FireOption::Resume]));
                }
            }
            None => {
                let Some(first) = a.bag.first() else { continue };
                if first.arrival > at {
                    continue;
                }
                let mut opts = SmallVec::new();
                for (j, m) in a.bag.iter().enumerate() {
                    if m.arrival != first.arrival {
                        break;
                    }
                    // identical messages lead to identical successors
                    if j > 0 && a.bag[j - 1] == *m {
                        continue;
                    }
                    opts.push(FireOption::Take(j as u8));
                }
                out.push((id, opts));
            }
        }
    }
    out
}

/// Computes the successors of `state` (all of them, or the selected one).
pub fn expand(
    model: &ActorModel,
    state: &TimedState,
    select: Select<'_>,
    record: bool,
) -> Result<Expansion, KernelError> {
    let rule = model.deadline_rule;
    let Some(now) = state.next_event_time(rule) else {
        return Ok(Expansion::Quiescent);
    };
    for (i, a) in state.actors.iter().enumerate() {
        for m in &a.bag {
            if let Some(d) = m.deadline {
                if rule.is_late(d, now) {
                    let actor = ActorId(i as u16);
                    let detail = format!(
                        "{}.{}({}) sent at {} by {} missed deadline {}",
                        model.actor_name(actor),
                        model.message_name(m.msg),
                        join(&m.args),
                        m.send_time,
                        model.actor_name(m.sender),
                        d
                    );
                    let events = if record {
                        vec![TraceEvent {
                            step: 0,
                            time: now,
                            actor: model.actor_name(actor).to_string(),
                            action: TraceAction::Violation {
                                kind: VerdictKind::DeadlineMiss,
                            },
                            detail: detail.clone(),
                        }]
                    } else {
                        Vec::new()
                    };
                    return Ok(Expansion::Violation(
                        Violation {
                            kind: VerdictKind::DeadlineMiss,
                            time: now,
                            actor,
                            detail,
                            step: None,
                        },
                        events,
                    ));
                }
            }
        }
    }

    let enabled = enabled(state, now);
    let mut per_actor: Vec<(ActorId, Vec<(FireOption, Branch)>)> = Vec::new();
    match select {
        Select::All => {
            for (actor, opts) in &enabled {
                let mut all = Vec::new();
                for &opt in opts {
                    for b in fire(model, state, *actor, opt, now, Forced::All, record)? {
                        all.push((opt, b));
                    }
                }
                per_actor.push((*actor, all));
            }
        }
        Select::Record(rec) => {
            check_same_actors(model, &enabled, rec.firings.iter().map(|f| (f.actor, f.option)))?;
            for f in &rec.firings {
                let b = fire(model, state, f.actor, f.option, now, Forced::Index(&f.choices), record)?;
                per_actor.push((f.actor, b.into_iter().map(|b| (f.option, b)).collect()));
            }
        }
        Select::Values(picks) => {
            check_same_actors(model, &enabled, picks.iter().map(|(a, o, _)| (*a, *o)))?;
            for (actor, opt, vals) in picks {
                let b = fire(model, state, *actor, *opt, now, Forced::Value(vals), record)?;
                per_actor.push((*actor, b.into_iter().map(|b| (*opt, b)).collect()));
            }
        }
    }

    let mut successors = Vec::new();
    if per_actor.is_empty() {
        let mut next = state.clone();
        next.now = now;
        successors.push(Successor {
            record: StepRecord::default(),
            state: next,
            events: Vec::new(),
        });
        return Ok(Expansion::Next(successors));
    }
    if per_actor.iter().any(|(_, b)| b.is_empty()) {
        return Err(KernelError::Model("an enabled actor produced no behaviour".into()));
    }

    // Mixed-radix walk over the product of per-actor branches.
    let mut digits = vec![0usize; per_actor.len()];
    loop {
        let mut next = state.clone();
        next.now = now;
        let mut record_out = StepRecord::default();
        let mut events = Vec::new();
        let mut fault: Option<(ActorId, String)> = None;
        for (k, (actor, branches)) in per_actor.iter().enumerate() {
            let (opt, b) = &branches[digits[k]];
            record_out.firings.push(Firing {
                actor: *actor,
                option: *opt,
                choices: b.choices.clone(),
            });
            let snap = next.actor_mut(*actor);
            if let FireOption::Take(i) = opt {
                snap.bag.remove(*i as usize);
            }
            snap.vars.clone_from(&b.vars);
            snap.cont = b.cont.clone();
            if record {
                events.extend(b.events.iter().cloned());
            }
            if fault.is_none() {
                if let Some(label) = &b.fault {
                    fault = Some((*actor, label.clone()));
                }
            }
        }
        if let Some((actor, label)) = fault {
            let detail = format!("assertion '{label}' failed");
            if record {
                events.push(TraceEvent {
                    step: 0,
                    time: now,
                    actor: model.actor_name(actor).to_string(),
                    action: TraceAction::Violation {
                        kind: VerdictKind::AssertionFailure,
                    },
                    detail: detail.clone(),
                });
            }
            return Ok(Expansion::Violation(
                Violation {
                    kind: VerdictKind::AssertionFailure,
                    time: now,
                    actor,
                    detail,
                    step: Some(record_out),
                },
                events,
            ));
        }
        for (k, (_, branches)) in per_actor.iter().enumerate() {
            for (target, m) in &branches[digits[k]].1.sends {
                let cap = model.capacity(*target);
                let snap = next.actor_mut(*target);
                snap.enqueue(m.clone());
                if snap.bag.len() > cap {
                    let detail = format!(
                        "bag of {} exceeds capacity {} on {}",
                        model.actor_name(*target),
                        cap,
                        model.message_name(m.msg)
                    );
                    if record {
                        events.push(TraceEvent {
                            step: 0,
                            time: now,
                            actor: model.actor_name(*target).to_string(),
                            action: TraceAction::Violation {
                                kind: VerdictKind::QueueOverflow,
                            },
                            detail: detail.clone(),
                        });
                    }
                    return Ok(Expansion::Violation(
                        Violation {
                            kind: VerdictKind::QueueOverflow,
                            time: now,
                            actor: *target,
                            detail,
                            step: Some(record_out),
                        },
                        events,
                    ));
                }
            }
        }
        successors.push(Successor {
            record: record_out,
            state: next,
            events,
        });

        let mut k = per_actor.len();
        loop {
            if k == 0 {
                return Ok(Expansion::Next(successors));
            }
            k -= 1;
            digits[k] += 1;
            if digits[k] < per_actor[k].1.len() {
                break;
            }
            digits[k] = 0;
        }
    }
}

fn check_same_actors(
    model: &ActorModel,
    enabled: &[(ActorId, SmallVec<[FireOption; 2]>)],
    chosen: impl Iterator<Item = (ActorId, FireOption)>,
) -> Result<(), KernelError> {
    let chosen: Vec<_> = chosen.collect();
    let same = chosen.len() == enabled.len()
        && chosen
            .iter()
            .zip(enabled)
            .all(|((a, o), (b, opts))| a == b && opts.contains(o));
    if same {
        Ok(())
    } else {
        let names = |it: Vec<ActorId>| {
            it.into_iter()
                .map(|a| model.actor_name(a).to_string())
                .collect::<Vec<_>>()
                .join(",")
        };
        Err(KernelError::Replay(format!(
            "recorded step fires [{}] but enabled actors are [{}]",
            names(chosen.iter().map(|c| c.0).collect()),
            names(enabled.iter().map(|e| e.0).collect())
        )))
    }
}

fn fire(
    model: &ActorModel,
    state: &TimedState,
    actor: ActorId,
    option: FireOption,
    now: Time,
    forced: Forced<'_>,
    record: bool,
) -> Result<Vec<Branch>, KernelError> {
    let snap = state.actor(actor);
    let (frame, mut head) = match option {
        FireOption::Resume => {
            let c = snap
                .cont
                .as_ref()
                .ok_or_else(|| KernelError::Replay("resume without continuation".into()))?;
            let head = record.then(|| TraceEvent {
                step: 0,
                time: now,
                actor: model.actor_name(actor).to_string(),
                action: TraceAction::Resume,
                detail: model.handler(actor, c.handler).name.clone(),
            });
            (
                Frame {
                    handler: c.handler,
                    pc: c.pc as usize,
                    locals: c.locals.clone(),
                    params: c.params.clone(),
                    sender: c.sender,
                    served_arrival: c.served_arrival,
                },
                head,
            )
        }
        FireOption::Take(i) => {
            let m = snap
                .bag
                .get(i as usize)
                .ok_or_else(|| KernelError::Replay(format!("no message at bag index {i}")))?;
            let handler = model.handler_for(actor, m.msg).ok_or_else(|| {
                KernelError::Model(format!(
                    "{} has no handler for {}",
                    model.actor_name(actor),
                    model.message_name(m.msg)
                ))
            })?;
            let head = record.then(|| TraceEvent {
                step: 0,
                time: now,
                actor: model.actor_name(actor).to_string(),
                action: TraceAction::TakeMessage {
                    message: model.message_name(m.msg).to_string(),
                    arrival: m.arrival,
                },
                detail: format!(
                    "{}({}) from {}",
                    model.message_name(m.msg),
                    join(&m.args),
                    model.actor_name(m.sender)
                ),
            });
            (
                Frame {
                    handler,
                    pc: 0,
                    locals: SmallVec::new(),
                    params: m.args.clone(),
                    sender: m.sender,
                    served_arrival: m.arrival,
                },
                head,
            )
        }
    };
    let handler = model.handler(actor, frame.handler);
    let runner = Runner {
        model,
        actor,
        now,
        frame: &frame,
        body: &handler.body,
        handler_name: &handler.name,
        record,
    };
    let mut branches = runner.run(snap.vars.clone(), forced)?;
    if !forced.is_all() && branches.len() != 1 {
        return Err(KernelError::Replay("forced run did not yield one branch".into()));
    }
    if let Some(h) = head.take() {
        for b in &mut branches {
            b.events.insert(0, h.clone());
        }
    }
    Ok(branches)
}
