use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use super::program::{Handler, Instr, VarSlot};
use super::value::{ActorId, HandlerId, MsgId, Value};
use super::KernelError;

/// When a message counts as served in time.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub enum DeadlineRule {
    /// The message must be taken strictly before its absolute deadline.
    #[default]
    Exclusive,
    /// Taking the message exactly at its deadline is still on time.
    Inclusive,
}

impl DeadlineRule {
    /// True when a message with deadline `deadline` is late at time `now`.
    pub fn is_late(self, deadline: i64, now: i64) -> bool {
        match self {
            DeadlineRule::Exclusive => deadline <= now,
            DeadlineRule::Inclusive => deadline < now,
        }
    }

    /// First instant at which a message with this deadline is late.
    pub fn expiry(self, deadline: i64) -> i64 {
        match self {
            DeadlineRule::Exclusive => deadline,
            DeadlineRule::Inclusive => deadline + 1,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct VarDecl {
    pub name: String,
    pub init: Value,
}

/// A reactive class: state variables, message servers and a bag capacity.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ActorClass {
    pub name: String,
    pub capacity: usize,
    pub vars: Vec<VarDecl>,
    pub handlers: Vec<Handler>,
    /// Runs once at time zero; may send but must not delay.
    pub constructor: Option<Handler>,
}

impl ActorClass {
    pub fn new(name: &str, capacity: usize) -> Self {
        ActorClass {
            name: name.to_string(),
            capacity,
            vars: Vec::new(),
            handlers: Vec::new(),
            constructor: None,
        }
    }

    pub fn var(&mut self, name: &str, init: impl Into<Value>) -> VarSlot {
        self.vars.push(VarDecl {
            name: name.to_string(),
            init: init.into(),
        });
        VarSlot((self.vars.len() - 1) as u16)
    }

    pub fn handler(&mut self, h: Handler) -> &mut Self {
        self.handlers.push(h);
        self
    }

    pub fn constructor(&mut self, h: Handler) -> &mut Self {
        self.constructor = Some(h);
        self
    }

    pub fn handler_named(&self, name: &str) -> Option<&Handler> {
        self.handlers.iter().find(|h| h.name == name)
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ActorInstance {
    pub name: String,
    pub class: usize,
    /// Initial values that replace the class defaults.
    pub init: Vec<(VarSlot, Value)>,
}

/// A closed network of actor instances.
#[derive(Clone, Debug, Serialize)]
pub struct ActorModel {
    pub classes: Vec<ActorClass>,
    pub instances: Vec<ActorInstance>,
    pub deadline_rule: DeadlineRule,
    messages: Vec<String>,
    /// Per class, `MsgId` to handler index.
    #[serde(skip)]
    dispatch: Vec<Vec<Option<HandlerId>>>,
}

impl ActorModel {
    /// Resolves message names and checks that the model is well formed.
    pub fn new(
        mut classes: Vec<ActorClass>,
        instances: Vec<ActorInstance>,
        deadline_rule: DeadlineRule,
    ) -> Result<Self, KernelError> {
        let mut names: Vec<String> = Vec::new();
        let mut index: HashMap<String, MsgId> = HashMap::new();
        let mut intern = |n: &str| -> MsgId {
            if let Some(id) = index.get(n) {
                return *id;
            }
            let id = MsgId(names.len() as u16);
            names.push(n.to_string());
            index.insert(n.to_string(), id);
            id
        };
        for class in &classes {
            if class.capacity == 0 {
                return Err(KernelError::Model(format!(
                    "class {} has zero capacity",
                    class.name
                )));
            }
            for h in &class.handlers {
                intern(&h.name);
            }
        }
        for class in &mut classes {
            let nvars = class.vars.len();
            let handlers = class.handlers.iter_mut().chain(class.constructor.iter_mut());
            for h in handlers {
                for (pc, instr) in h.body.iter_mut().enumerate() {
                    match instr {
                        Instr::Send(s) => match index.get(&s.message) {
                            Some(id) => s.msg_id = Some(*id),
                            None => {
                                return Err(KernelError::Model(format!(
                                    "{}.{}: no class handles message {}",
                                    class.name, h.name, s.message
                                )))
                            }
                        },
                        Instr::SetVar(v, _) if v.0 as usize >= nvars => {
                            return Err(KernelError::Model(format!(
                                "{}.{}: variable slot {} out of range",
                                class.name, h.name, v.0
                            )));
                        }
                        Instr::Choose(_, opts) | Instr::Delay(opts) if opts.is_empty() => {
                            return Err(KernelError::Model(format!(
                                "{}.{}@{pc}: empty choice set",
                                class.name, h.name
                            )));
                        }
                        _ => {}
                    }
                }
            }
        }
        for inst in &instances {
            if inst.class >= classes.len() {
                return Err(KernelError::Model(format!(
                    "instance {} refers to unknown class {}",
                    inst.name, inst.class
                )));
            }
        }
        let dispatch = classes
            .iter()
            .map(|c| {
                let mut table = vec![None; names.len()];
                for (i, h) in c.handlers.iter().enumerate() {
                    table[index[&h.name].0 as usize] = Some(HandlerId(i as u16));
                }
                table
            })
            .collect();
        Ok(ActorModel {
            classes,
            instances,
            deadline_rule,
            messages: names,
            dispatch,
        })
    }

    pub fn actor_count(&self) -> usize {
        self.instances.len()
    }

    pub fn actor_ids(&self) -> impl Iterator<Item = ActorId> {
        (0..self.instances.len() as u16).map(ActorId)
    }

    pub fn class_of(&self, actor: ActorId) -> &ActorClass {
        &self.classes[self.instances[actor.index()].class]
    }

    pub fn actor_name(&self, actor: ActorId) -> &str {
        &self.instances[actor.index()].name
    }

    pub fn actor_by_name(&self, name: &str) -> Option<ActorId> {
        self.instances
            .iter()
            .position(|i| i.name == name)
            .map(|i| ActorId(i as u16))
    }

    pub fn message_name(&self, msg: MsgId) -> &str {
        &self.messages[msg.0 as usize]
    }

    pub fn message_id(&self, name: &str) -> Option<MsgId> {
        self.messages
            .iter()
            .position(|m| m == name)
            .map(|i| MsgId(i as u16))
    }

    pub fn handler_for(&self, actor: ActorId, msg: MsgId) -> Option<HandlerId> {
        let class = self.instances[actor.index()].class;
        self.dispatch[class].get(msg.0 as usize).copied().flatten()
    }

    pub fn handler(&self, actor: ActorId, h: HandlerId) -> &Handler {
        &self.class_of(actor).handlers[h.0 as usize]
    }

    pub fn capacity(&self, actor: ActorId) -> usize {
        self.class_of(actor).capacity
    }

    pub fn initial_vars(&self, actor: ActorId) -> Vec<Value> {
        let inst = &self.instances[actor.index()];
        let mut vars: Vec<Value> = self.classes[inst.class]
            .vars
            .iter()
            .map(|v| v.init)
            .collect();
        for (slot, v) in &inst.init {
            vars[slot.0 as usize] = *v;
        }
        vars
    }
}
