//! The sensor-node network: sensor, misc task, CPU, wireless medium and two
//! radio devices, with TDMA or B-MAC media access.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::kernel::dsl::*;
use crate::kernel::{
    initial_state, ActorClass, ActorId, ActorInstance, ActorModel, DeadlineRule, Expr,
    HandlerBuilder, KernelError, SendSpec, TimedState, Value,
};
use crate::params::TaskParams;

/// Label of the assertion that encodes the packet requirement.
pub const PACKET_OVERRUN: &str = "packet-overrun";
/// Label of the assertion guarding slot bookkeeping.
pub const SLOT_OVERRUN: &str = "slot-overrun";

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Protocol {
    #[default]
    Tdma,
    Bmac,
}

impl std::fmt::Display for Protocol {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Protocol::Tdma => "tdma",
            Protocol::Bmac => "bmac",
        })
    }
}

/// Slot layout of the TDMA super-frame as seen by the sending device.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct TdmaGeometry {
    pub number_of_nodes: i64,
    pub slot_size: i64,
    /// Start of the sender's first slot.
    pub slot_offset: i64,
}

impl TdmaGeometry {
    /// `nodes` equal slots filling the super-frame, the sender's first.
    pub fn even(superframe: i64, nodes: i64) -> Self {
        TdmaGeometry {
            number_of_nodes: nodes,
            slot_size: if nodes > 0 { superframe / nodes } else { 0 },
            slot_offset: 0,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct WsanConfig {
    pub params: TaskParams,
    pub protocol: Protocol,
    pub geometry: TdmaGeometry,
    /// Release of the first misc job.
    pub misc_offset: i64,
    pub deadline_rule: DeadlineRule,
}

impl WsanConfig {
    pub fn new(params: TaskParams, protocol: Protocol) -> Self {
        let geometry = TdmaGeometry::even(params.tdma_superframe, DEFAULT_NODES);
        WsanConfig {
            params,
            protocol,
            geometry,
            misc_offset: 0,
            deadline_rule: DeadlineRule::default(),
        }
    }

    pub fn validate(&self) -> Vec<String> {
        let mut out = self.params.validate();
        if self.protocol == Protocol::Tdma {
            let g = &self.geometry;
            if g.number_of_nodes < 1 {
                out.push("number_of_nodes must be ≥ 1".into());
            }
            if g.slot_size < 1 {
                out.push("slot_size must be ≥ 1".into());
            }
            if g.slot_size * g.number_of_nodes != self.params.tdma_superframe {
                out.push(format!(
                    "slot_size × number_of_nodes = {} differs from tdma_superframe = {}",
                    g.slot_size * g.number_of_nodes,
                    self.params.tdma_superframe
                ));
            }
            if g.slot_offset < 0 {
                out.push("slot_offset must be ≥ 0".into());
            }
        }
        if self.misc_offset < 0 {
            out.push("misc_offset must be ≥ 0".into());
        }
        out
    }
}

/// Nodes sharing the super-frame unless configured otherwise.
pub const DEFAULT_NODES: i64 = 2;

#[derive(Debug, Error)]
pub enum NetworkError {
    #[error("invalid network configuration: {}", .0.join("; "))]
    Invalid(Vec<String>),
    #[error(transparent)]
    Kernel(#[from] KernelError),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ActorIds {
    pub medium: ActorId,
    pub cpu: ActorId,
    pub sensor: ActorId,
    pub misc: ActorId,
    pub sender: ActorId,
    pub receiver: ActorId,
}

#[derive(Clone, Debug)]
pub struct WsanNetwork {
    pub config: WsanConfig,
    pub model: ActorModel,
    pub initial: TimedState,
    pub ids: ActorIds,
}

const MEDIUM: u16 = 0;
const CPU: u16 = 1;
const SENSOR: u16 = 2;
const MISC: u16 = 3;
const SENDER: u16 = 4;
const RECEIVER: u16 = 5;

fn actor(i: u16) -> Value {
    Value::Actor(ActorId(i))
}

fn periodic_source(name: &str, lp: &str, event: &str, period: i64, offset: i64) -> ActorClass {
    let mut c = ActorClass::new(name, 2);
    let cpu = c.var("cpu", actor(CPU));
    let per = c.var("period", period);

    let mut h = HandlerBuilder::new(lp);
    h.send(SendSpec::to(var(cpu), event).deadline(var(per)));
    h.send(SendSpec::to(this(), lp).after(var(per)));
    c.handler(h.build());

    let mut k = HandlerBuilder::new(name);
    let first = SendSpec::to(this(), lp);
    k.send(if offset > 0 { first.after(int(offset)) } else { first });
    c.constructor(k.build());
    c
}

fn cpu_class(p: &TaskParams) -> ActorClass {
    let mut c = ActorClass::new("CPU", 10);
    let sender_dev = c.var("senderDevice", actor(SENDER));
    let receiver_dev = c.var("receiverDevice", actor(RECEIVER));
    let counter = c.var("collectedSamplesCounter", 0);
    let buffer = c.var("bufferSize", p.buffer_size);

    let mut h = HandlerBuilder::new("miscEvent");
    h.delay(range(1, p.misc_wcet));
    c.handler(h.build());

    let mut h = HandlerBuilder::new("sensorEvent");
    h.delay(range(p.sensor_bcet, p.sensor_wcet));
    h.set(counter, var(counter) + int(1));
    h.if_then(eq(var(counter), var(buffer)), |b| {
        b.send(SendSpec::to(var(sender_dev), "send").args([var(receiver_dev), int(1)]));
        b.set(counter, int(0));
    });
    c.handler(h.build());
    c
}

fn tx_choices(p: &TaskParams) -> Vec<Expr> {
    p.packet_tx_times.iter().map(|&t| int(t)).collect()
}

fn ether_class(p: &TaskParams) -> ActorClass {
    let mut c = ActorClass::new("Ether", 5);
    let sender_dev = c.var("senderDev", Value::Null);
    let receiver_dev = c.var("receiverDev", Value::Null);

    let mut h = HandlerBuilder::new("getStatus");
    h.send(SendSpec::to(sender(), "receiveStatus").args([ne(var(receiver_dev), null())]));
    c.handler(h.build());

    let mut h = HandlerBuilder::new("broadcast");
    let receiver = h.param("receiver");
    let packets = h.param("packets");
    let tt = h.local("OnePacketTT");
    let choices = tx_choices(p);
    h.if_else(
        eq(var(sender_dev), null()),
        |b| {
            b.choose(tt, choices);
            b.set(sender_dev, sender());
            b.set(receiver_dev, receiver.clone());
            let span = packets.clone() * local(tt);
            b.send(SendSpec::to(this(), "broadcastingIsCompleted").after(span.clone()));
            b.send(SendSpec::to(sender(), "receiveResult").args([boolean(true)]).after(span));
            b.send(SendSpec::to(receiver.clone(), "receiveData").args([receiver.clone(), packets.clone()]));
        },
        |b| {
            b.send(SendSpec::to(sender(), "receiveResult").args([boolean(false)]));
        },
    );
    c.handler(h.build());

    let mut h = HandlerBuilder::new("broadcastingIsCompleted");
    h.set(sender_dev, null());
    h.set(receiver_dev, null());
    c.handler(h.build());
    c
}

fn receive_data() -> HandlerBuilder {
    let mut h = HandlerBuilder::new("receiveData");
    h.param("receiver");
    h.param("packets");
    h
}

fn rcd_tdma(g: &TdmaGeometry) -> ActorClass {
    let mut c = ActorClass::new("RCD", 10);
    let medium = c.var("medium", actor(MEDIUM));
    let id = c.var("id", 0);
    let slot_size = c.var("slotSize", g.slot_size);
    let nodes = c.var("numberOfNodes", g.number_of_nodes);
    let sending = c.var("sendingData", 0);
    let busy = c.var("busyWithSending", false);
    let active = c.var("inActivePeriod", false);
    let receiver_device = c.var("receiverDevice", Value::Null);

    let mut h = HandlerBuilder::new("send");
    let receiver = h.param("receiver");
    let data = h.param("data");
    h.assert(eq(var(receiver_device), null()), PACKET_OVERRUN);
    h.set(receiver_device, receiver);
    h.set(sending, data);
    h.send(SendSpec::to(this(), "checkPendingData"));
    c.handler(h.build());

    let mut h = HandlerBuilder::new("handleTDMASlot");
    let remained = h.local("remainedTime");
    h.set(active, not(var(active)));
    h.if_else(
        var(active),
        |b| {
            b.set_local(remained, var(slot_size) - waiting_time());
            b.assert(gt(local(remained), int(0)), SLOT_OVERRUN);
            b.send(SendSpec::to(this(), "checkPendingData"));
            b.send(SendSpec::to(this(), "handleTDMASlot").after(local(remained)));
        },
        |b| {
            let gap = var(slot_size) * (var(nodes) - int(1)) - waiting_time();
            b.send(SendSpec::to(this(), "handleTDMASlot").after(gap));
        },
    );
    c.handler(h.build());

    let mut h = HandlerBuilder::new("checkPendingData");
    let ready = and(
        and(var(active), ne(var(receiver_device), null())),
        not(var(busy)),
    );
    h.if_then(ready, |b| {
        b.send(
            SendSpec::to(var(medium), "broadcast").args([var(receiver_device), var(sending)]),
        );
        b.set(busy, boolean(true));
    });
    c.handler(h.build());

    let mut h = HandlerBuilder::new("receiveResult");
    let ok = h.param("result");
    h.set(busy, boolean(false));
    h.if_else(
        ok,
        |b| {
            b.set(receiver_device, null());
            b.set(sending, int(0));
        },
        |b| {
            b.send(SendSpec::to(this(), "checkPendingData"));
        },
    );
    c.handler(h.build());

    let mut h = HandlerBuilder::new("receiveStatus");
    h.param("busy");
    c.handler(h.build());
    c.handler(receive_data().build());

    let mut k = HandlerBuilder::new("RCD");
    k.if_then(eq(var(id), int(1)), |b| {
        let first = SendSpec::to(this(), "handleTDMASlot");
        b.send(if g.slot_offset > 0 {
            first.after(int(g.slot_offset))
        } else {
            first
        });
    });
    c.constructor(k.build());
    c
}

fn rcd_bmac(p: &TaskParams) -> ActorClass {
    let mut c = ActorClass::new("RCD", 10);
    let medium = c.var("medium", actor(MEDIUM));
    c.var("id", 0);
    let sending = c.var("sendingData", 0);
    let receiver_device = c.var("receiverDevice", Value::Null);

    let mut h = HandlerBuilder::new("send");
    let receiver = h.param("receiver");
    let data = h.param("data");
    h.assert(eq(var(receiver_device), null()), PACKET_OVERRUN);
    h.set(receiver_device, receiver);
    h.set(sending, data);
    h.send(SendSpec::to(var(medium), "getStatus"));
    c.handler(h.build());

    let mut h = HandlerBuilder::new("receiveStatus");
    let channel_busy = h.param("busy");
    let tt = h.local("OnePacketTT");
    h.choose(tt, tx_choices(p));
    h.if_else(
        channel_busy,
        |b| {
            b.send(SendSpec::to(var(medium), "getStatus").after(local(tt)));
        },
        |b| {
            b.send(
                SendSpec::to(var(medium), "broadcast").args([var(receiver_device), var(sending)]),
            );
            b.delay(vec![local(tt) * var(sending)]);
        },
    );
    c.handler(h.build());

    let mut h = HandlerBuilder::new("receiveResult");
    let ok = h.param("result");
    let tt = h.local("OnePacketTT");
    h.if_else(
        ok,
        |b| {
            b.set(receiver_device, null());
            b.set(sending, int(0));
        },
        |b| {
            b.choose(tt, tx_choices(p));
            b.send(SendSpec::to(var(medium), "getStatus").after(local(tt)));
        },
    );
    c.handler(h.build());
    c.handler(receive_data().build());
    c
}

/// Instantiates the six-actor network and its initial state.
pub fn build_network(config: &WsanConfig) -> Result<WsanNetwork, NetworkError> {
    let problems = config.validate();
    if !problems.is_empty() {
        return Err(NetworkError::Invalid(problems));
    }
    let p = &config.params;
    let rcd = match config.protocol {
        Protocol::Tdma => rcd_tdma(&config.geometry),
        Protocol::Bmac => rcd_bmac(p),
    };
    let classes = vec![
        ether_class(p),
        cpu_class(p),
        periodic_source("Sensor", "sensorLoop", "sensorEvent", p.sensor_period, 0),
        periodic_source("Misc", "miscLoop", "miscEvent", p.misc_period, config.misc_offset),
        rcd,
    ];
    let id_slot = crate::kernel::program::VarSlot(1);
    let inst = |name: &str, class: usize, init: Vec<_>| ActorInstance {
        name: name.to_string(),
        class,
        init,
    };
    let instances = vec![
        inst("medium", 0, vec![]),
        inst("cpu", 1, vec![]),
        inst("sensor", 2, vec![]),
        inst("misc", 3, vec![]),
        inst("sensorNodeSenderDevice", 4, vec![(id_slot, Value::Int(1))]),
        inst("receiver", 4, vec![(id_slot, Value::Int(0))]),
    ];
    let model = ActorModel::new(classes, instances, config.deadline_rule)?;
    let initial = initial_state(&model)?;
    Ok(WsanNetwork {
        config: config.clone(),
        model,
        initial,
        ids: ActorIds {
            medium: ActorId(MEDIUM),
            cpu: ActorId(CPU),
            sensor: ActorId(SENSOR),
            misc: ActorId(MISC),
            sender: ActorId(SENDER),
            receiver: ActorId(RECEIVER),
        },
    })
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ActorDescription {
    pub name: String,
    pub class: String,
    pub capacity: usize,
    pub vars: Vec<(String, Value)>,
    pub handlers: Vec<String>,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct PendingMessage {
    pub target: String,
    pub message: String,
    pub arrival: i64,
    pub deadline: Option<i64>,
}

/// Audit view of an instantiated network.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct NetworkDescription {
    pub protocol: Protocol,
    pub params: TaskParams,
    pub geometry: Option<TdmaGeometry>,
    pub misc_offset: i64,
    pub deadline_rule: DeadlineRule,
    pub actors: Vec<ActorDescription>,
    pub initial_messages: Vec<PendingMessage>,
}

impl WsanNetwork {
    pub fn describe(&self) -> NetworkDescription {
        let m = &self.model;
        let actors = m
            .actor_ids()
            .map(|a| {
                let class = m.class_of(a);
                ActorDescription {
                    name: m.actor_name(a).to_string(),
                    class: class.name.clone(),
                    capacity: class.capacity,
                    vars: class
                        .vars
                        .iter()
                        .zip(&self.initial.actor(a).vars)
                        .map(|(d, v)| (d.name.clone(), *v))
                        .collect(),
                    handlers: class.handlers.iter().map(|h| h.name.clone()).collect(),
                }
            })
            .collect();
        let initial_messages = m
            .actor_ids()
            .flat_map(|a| {
                self.initial.actor(a).bag.iter().map(move |msg| PendingMessage {
                    target: m.actor_name(a).to_string(),
                    message: m.message_name(msg.msg).to_string(),
                    arrival: msg.arrival,
                    deadline: msg.deadline,
                })
            })
            .collect();
        NetworkDescription {
            protocol: self.config.protocol,
            params: self.config.params.clone(),
            geometry: (self.config.protocol == Protocol::Tdma).then_some(self.config.geometry),
            misc_offset: self.config.misc_offset,
            deadline_rule: self.config.deadline_rule,
            actors,
            initial_messages,
        }
    }
}
