use serde::{Deserialize, Serialize};
use smallvec::SmallVec;

use super::model::DeadlineRule;
use super::value::{ActorId, HandlerId, MsgId, Time, Value};

pub type Payload = SmallVec<[Value; 3]>;

/// A message sitting in an actor's bag.
///
/// Field order matters: the derived `Ord` sorts bags by arrival time first,
/// which is also the service order.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct MessageInstance {
    pub arrival: Time,
    pub deadline: Option<Time>,
    pub msg: MsgId,
    pub args: Payload,
    pub sender: ActorId,
    pub send_time: Time,
}

/// A handler suspended at a `delay`.
#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Continuation {
    /// The actor is busy until this instant.
    pub resume_at: Time,
    pub handler: HandlerId,
    pub pc: u16,
    pub locals: SmallVec<[Value; 4]>,
    pub params: Payload,
    pub sender: ActorId,
    /// Arrival time of the message being served.
    pub served_arrival: Time,
}

#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct ActorSnapshot {
    pub vars: Vec<Value>,
    pub cont: Option<Continuation>,
    /// Kept sorted.
    pub bag: Vec<MessageInstance>,
}

impl ActorSnapshot {
    pub fn busy_until(&self) -> Option<Time> {
        self.cont.as_ref().map(|c| c.resume_at)
    }

    pub fn is_idle(&self) -> bool {
        self.cont.is_none()
    }

    pub fn enqueue(&mut self, m: MessageInstance) {
        let at = self.bag.partition_point(|x| x <= &m);
        self.bag.insert(at, m);
    }
}

/// Global snapshot of a timed actor network.
#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct TimedState {
    pub now: Time,
    pub actors: Vec<ActorSnapshot>,
}

impl TimedState {
    pub fn actor(&self, id: ActorId) -> &ActorSnapshot {
        &self.actors[id.index()]
    }

    pub fn actor_mut(&mut self, id: ActorId) -> &mut ActorSnapshot {
        &mut self.actors[id.index()]
    }

    /// Visits every stored timestamp.
    fn times_mut(&mut self, mut f: impl FnMut(&mut Time)) {
        f(&mut self.now);
        for a in &mut self.actors {
            if let Some(c) = &mut a.cont {
                f(&mut c.resume_at);
                f(&mut c.served_arrival);
            }
            for m in &mut a.bag {
                f(&mut m.arrival);
                f(&mut m.send_time);
                if let Some(d) = &mut m.deadline {
                    f(d);
                }
            }
        }
    }

    pub fn min_time(&self) -> Time {
        let mut m = self.now;
        for a in &self.actors {
            if let Some(c) = &a.cont {
                m = m.min(c.resume_at).min(c.served_arrival);
            }
            for msg in &a.bag {
                m = m.min(msg.arrival).min(msg.send_time);
                if let Some(d) = msg.deadline {
                    m = m.min(d);
                }
            }
        }
        m
    }

    /// Adds `delta` to every stored time.
    pub fn shift(&mut self, delta: Time) {
        self.times_mut(|t| *t += delta);
    }

    /// Returns the time-shift representative and the amount subtracted.
    pub fn canonical(mut self) -> (TimedState, Time) {
        let m = self.min_time();
        if m != 0 {
            self.shift(-m);
        }
        (self, m)
    }

    pub fn canonicalize(self) -> TimedState {
        self.canonical().0
    }

    /// Earliest instant at which something can happen, or `None` when the
    /// network is quiescent.
    ///
    /// Candidates are continuation wake-ups, arrivals at idle actors and the
    /// expiry of any pending deadline.
    pub fn next_event_time(&self, rule: DeadlineRule) -> Option<Time> {
        let mut best: Option<Time> = None;
        let mut consider = |t: Time| best = Some(best.map_or(t, |b| b.min(t)));
        for a in &self.actors {
            match &a.cont {
                Some(c) => consider(c.resume_at),
                None => {
                    if let Some(first) = a.bag.first() {
                        consider(first.arrival);
                    }
                }
            }
            for m in &a.bag {
                if let Some(d) = m.deadline {
                    consider(rule.expiry(d));
                }
            }
        }
        best.map(|t| t.max(self.now))
    }

    pub fn encode(&self) -> Vec<u8> {
        postcard::to_allocvec(self).expect("state serialization cannot fail")
    }

    pub fn decode(bytes: &[u8]) -> TimedState {
        postcard::from_bytes(bytes).expect("state store holds valid encodings")
    }
}
