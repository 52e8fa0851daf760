#![allow(dead_code)]

use std::collections::{HashSet, VecDeque};

use proptest::prelude::*;
use smallvec::SmallVec;
use wsan_sched::kernel::*;
use wsan_sched::params::TaskParams;
use wsan_sched::wsan::{build_network, Protocol, WsanConfig, WsanNetwork};

pub fn network(cs: i64, n: i64, period: i64, protocol: Protocol) -> WsanNetwork {
    let p = TaskParams {
        sensor_wcet: cs,
        buffer_size: n,
        sensor_period: period,
        ..TaskParams::baseline()
    };
    build_network(&WsanConfig::new(p, protocol)).unwrap()
}

/// Plain BFS over canonical states, written independently of the explorer.
/// Returns every reachable canonical state, or the first violation kind.
pub fn reachable(model: &ActorModel, initial: &TimedState, cap: usize) -> Result<Vec<TimedState>, VerdictKind> {
    let root = initial.clone().canonicalize();
    let mut seen: HashSet<TimedState> = HashSet::new();
    let mut order = Vec::new();
    let mut queue = VecDeque::new();
    seen.insert(root.clone());
    queue.push_back(root);
    while let Some(s) = queue.pop_front() {
        order.push(s.clone());
        assert!(order.len() <= cap, "state cap exceeded");
        match expand(model, &s, Select::All, false).unwrap() {
            Expansion::Quiescent => {}
            Expansion::Violation(v, _) => return Err(v.kind),
            Expansion::Next(succ) => {
                for x in succ {
                    let c = x.state.canonicalize();
                    if seen.insert(c.clone()) {
                        queue.push_back(c);
                    }
                }
            }
        }
    }
    Ok(order)
}

fn arb_value() -> impl Strategy<Value = Value> {
    prop_oneof![
        Just(Value::Null),
        any::<bool>().prop_map(Value::Bool),
        (-50i64..50).prop_map(Value::Int),
        (0u16..4).prop_map(|a| Value::Actor(ActorId(a))),
    ]
}

fn arb_message() -> impl Strategy<Value = MessageInstance> {
    (0i64..40, 0i64..20, proptest::option::of(0i64..30), 0u16..5, proptest::collection::vec(arb_value(), 0..3), 0u16..4)
        .prop_map(|(send, after, dl, msg, args, sender)| MessageInstance {
            arrival: send + after,
            deadline: dl.map(|d| send + d),
            msg: MsgId(msg),
            args: SmallVec::from_vec(args),
            sender: ActorId(sender),
            send_time: send,
        })
}

fn arb_actor() -> impl Strategy<Value = ActorSnapshot> {
    (
        proptest::collection::vec(arb_value(), 0..4),
        proptest::option::of((0i64..40, 0i64..40, 0u16..4, proptest::collection::vec(arb_value(), 0..3))),
        proptest::collection::vec(arb_message(), 0..4),
    )
        .prop_map(|(vars, cont, bag)| {
            let mut a = ActorSnapshot {
                vars,
                cont: cont.map(|(resume, served, pc, locals)| Continuation {
                    resume_at: resume,
                    handler: HandlerId(0),
                    pc,
                    locals: SmallVec::from_vec(locals),
                    params: SmallVec::new(),
                    sender: ActorId(0),
                    served_arrival: served,
                }),
                bag: Vec::new(),
            };
            for m in bag {
                a.enqueue(m);
            }
            a
        })
}

pub fn arb_state() -> impl Strategy<Value = TimedState> {
    (0i64..40, proptest::collection::vec(arb_actor(), 1..4))
        .prop_map(|(now, actors)| TimedState { now, actors })
}
