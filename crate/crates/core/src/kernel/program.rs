//! Handler programs.
//!
//! A message server body is a flat instruction list with explicit jumps, so a
//! handler suspended at a `delay` can be resumed from a program counter. The
//! [`HandlerBuilder`] offers structured `if`/`else` and lowers it to jumps.

use std::ops::{Add, Mul, Sub};

use serde::{Deserialize, Serialize};

use super::value::{MsgId, Value};

/// State variable slot of an actor class.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct VarSlot(pub u16);

/// Local variable slot of a handler.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct LocalSlot(pub u8);

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum BinOp {
    Add,
    Sub,
    Mul,
    Eq,
    Ne,
    Lt,
    Le,
    Gt,
    Ge,
    And,
    Or,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Expr {
    Const(Value),
    Var(VarSlot),
    Local(LocalSlot),
    Param(u8),
    /// The actor that sent the message being served.
    Sender,
    SelfRef,
    /// `now - arrival` of the message being served.
    WaitingTime,
    Not(Box<Expr>),
    Bin(BinOp, Box<Expr>, Box<Expr>),
}

impl Expr {
    fn bin(op: BinOp, a: Expr, b: Expr) -> Expr {
        Expr::Bin(op, Box::new(a), Box::new(b))
    }
}

impl Add for Expr {
    type Output = Expr;
    fn add(self, rhs: Expr) -> Expr {
        Expr::bin(BinOp::Add, self, rhs)
    }
}

impl Sub for Expr {
    type Output = Expr;
    fn sub(self, rhs: Expr) -> Expr {
        Expr::bin(BinOp::Sub, self, rhs)
    }
}

impl Mul for Expr {
    type Output = Expr;
    fn mul(self, rhs: Expr) -> Expr {
        Expr::bin(BinOp::Mul, self, rhs)
    }
}

/// Small constructors for writing handler bodies.
pub mod dsl {
    use super::*;

    pub fn int(v: i64) -> Expr {
        Expr::Const(Value::Int(v))
    }

    pub fn boolean(b: bool) -> Expr {
        Expr::Const(Value::Bool(b))
    }

    pub fn null() -> Expr {
        Expr::Const(Value::Null)
    }

    pub fn konst(v: impl Into<Value>) -> Expr {
        Expr::Const(v.into())
    }

    pub fn var(v: VarSlot) -> Expr {
        Expr::Var(v)
    }

    pub fn local(l: LocalSlot) -> Expr {
        Expr::Local(l)
    }

    pub fn sender() -> Expr {
        Expr::Sender
    }

    pub fn this() -> Expr {
        Expr::SelfRef
    }

    pub fn waiting_time() -> Expr {
        Expr::WaitingTime
    }

    pub fn not(e: Expr) -> Expr {
        Expr::Not(Box::new(e))
    }

    pub fn eq(a: Expr, b: Expr) -> Expr {
        Expr::bin(BinOp::Eq, a, b)
    }

    pub fn ne(a: Expr, b: Expr) -> Expr {
        Expr::bin(BinOp::Ne, a, b)
    }

    pub fn lt(a: Expr, b: Expr) -> Expr {
        Expr::bin(BinOp::Lt, a, b)
    }

    pub fn le(a: Expr, b: Expr) -> Expr {
        Expr::bin(BinOp::Le, a, b)
    }

    pub fn gt(a: Expr, b: Expr) -> Expr {
        Expr::bin(BinOp::Gt, a, b)
    }

    pub fn ge(a: Expr, b: Expr) -> Expr {
        Expr::bin(BinOp::Ge, a, b)
    }

    pub fn and(a: Expr, b: Expr) -> Expr {
        Expr::bin(BinOp::And, a, b)
    }

    pub fn or(a: Expr, b: Expr) -> Expr {
        Expr::bin(BinOp::Or, a, b)
    }

    /// Inclusive integer range as a nondeterministic choice set.
    pub fn range(lo: i64, hi: i64) -> Vec<Expr> {
        (lo..=hi).map(int).collect()
    }
}

/// An asynchronous send, written `target.message(args) after(a) deadline(d)`.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct SendSpec {
    pub target: Expr,
    pub message: String,
    #[serde(skip)]
    pub msg_id: Option<MsgId>,
    pub args: Vec<Expr>,
    pub after: Option<Expr>,
    pub deadline: Option<Expr>,
}

impl SendSpec {
    pub fn to(target: Expr, message: &str) -> Self {
        SendSpec {
            target,
            message: message.to_string(),
            msg_id: None,
            args: Vec::new(),
            after: None,
            deadline: None,
        }
    }

    pub fn args(mut self, args: impl IntoIterator<Item = Expr>) -> Self {
        self.args = args.into_iter().collect();
        self
    }

    pub fn after(mut self, e: Expr) -> Self {
        self.after = Some(e);
        self
    }

    pub fn deadline(mut self, e: Expr) -> Self {
        self.deadline = Some(e);
        self
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Instr {
    SetVar(VarSlot, Expr),
    SetLocal(LocalSlot, Expr),
    /// Nondeterministic assignment: one branch per option.
    Choose(LocalSlot, Vec<Expr>),
    Send(SendSpec),
    /// Keeps the actor busy; one branch per option.
    Delay(Vec<Expr>),
    Assert(Expr, String),
    JumpUnless(Expr, usize),
    Jump(usize),
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Handler {
    pub name: String,
    pub params: Vec<String>,
    pub locals: Vec<String>,
    pub body: Vec<Instr>,
}

#[derive(Debug)]
pub struct HandlerBuilder {
    name: String,
    params: Vec<String>,
    locals: Vec<String>,
    body: Vec<Instr>,
}

impl HandlerBuilder {
    pub fn new(name: &str) -> Self {
        HandlerBuilder {
            name: name.to_string(),
            params: Vec::new(),
            locals: Vec::new(),
            body: Vec::new(),
        }
    }

    /// Declares the next positional parameter and returns an expression reading it.
    pub fn param(&mut self, name: &str) -> Expr {
        self.params.push(name.to_string());
        Expr::Param((self.params.len() - 1) as u8)
    }

    pub fn local(&mut self, name: &str) -> LocalSlot {
        self.locals.push(name.to_string());
        LocalSlot((self.locals.len() - 1) as u8)
    }

    pub fn set(&mut self, slot: VarSlot, e: Expr) -> &mut Self {
        self.body.push(Instr::SetVar(slot, e));
        self
    }

    pub fn set_local(&mut self, slot: LocalSlot, e: Expr) -> &mut Self {
        self.body.push(Instr::SetLocal(slot, e));
        self
    }

    pub fn choose(&mut self, slot: LocalSlot, options: Vec<Expr>) -> &mut Self {
        self.body.push(Instr::Choose(slot, options));
        self
    }

    pub fn send(&mut self, send: SendSpec) -> &mut Self {
        self.body.push(Instr::Send(send));
        self
    }

    pub fn delay(&mut self, options: Vec<Expr>) -> &mut Self {
        self.body.push(Instr::Delay(options));
        self
    }

    pub fn assert(&mut self, cond: Expr, label: &str) -> &mut Self {
        self.body.push(Instr::Assert(cond, label.to_string()));
        self
    }

    pub fn if_then(&mut self, cond: Expr, then: impl FnOnce(&mut Self)) -> &mut Self {
        let jump = self.body.len();
        self.body.push(Instr::JumpUnless(cond, usize::MAX));
        then(self);
        let end = self.body.len();
        self.body[jump] = match std::mem::replace(&mut self.body[jump], Instr::Jump(0)) {
            Instr::JumpUnless(c, _) => Instr::JumpUnless(c, end),
            _ => unreachable!(),
        };
        self
    }

    pub fn if_else(
        &mut self,
        cond: Expr,
        then: impl FnOnce(&mut Self),
        otherwise: impl FnOnce(&mut Self),
    ) -> &mut Self {
        let jump = self.body.len();
        self.body.push(Instr::JumpUnless(cond.clone(), usize::MAX));
        then(self);
        let skip = self.body.len();
        self.body.push(Instr::Jump(usize::MAX));
        let else_start = self.body.len();
        otherwise(self);
        let end = self.body.len();
        self.body[jump] = Instr::JumpUnless(cond, else_start);
        self.body[skip] = Instr::Jump(end);
        self
    }

    pub fn build(self) -> Handler {
        Handler {
            name: self.name,
            params: self.params,
            locals: self.locals,
            body: self.body,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::dsl::*;
    use super::*;

    #[test]
    fn if_else_lowers_to_jumps() {
        let mut h = HandlerBuilder::new("h");
        let x = h.local("x");
        h.if_else(
            boolean(true),
            |b| {
                b.set_local(x, int(1));
            },
            |b| {
                b.set_local(x, int(2));
            },
        );
        let h = h.build();
        assert_eq!(h.body.len(), 4);
        assert_eq!(h.body[0], Instr::JumpUnless(boolean(true), 3));
        assert_eq!(h.body[2], Instr::Jump(4));
    }

    #[test]
    fn if_then_skips_to_end() {
        let mut h = HandlerBuilder::new("h");
        let x = h.local("x");
        h.if_then(boolean(false), |b| {
            b.set_local(x, int(1));
            b.set_local(x, int(2));
        });
        assert_eq!(h.build().body[0], Instr::JumpUnless(boolean(false), 3));
    }
}
