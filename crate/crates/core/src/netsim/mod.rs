//! Simulated all-to-all network with per-link delay, and the request /
//! gradient-exchange / combine protocol that runs over it.

mod controller;
mod orchestrator;

use std::cmp::Reverse;
use std::collections::{BinaryHeap, HashSet};

use crate::combiner::CumulativeGradient;
use crate::error::{AncError, Result};

pub use controller::{PcDmcanc, PcDmcancConfig, RoundTrigger};
pub use orchestrator::{ProtocolOrchestrator, RoundHandle, RoundRecord};

#[derive(Debug, Clone, PartialEq)]
pub enum EventKind {
    CommRequest,
    GradientShare(CumulativeGradient),
}

impl EventKind {
    fn rank(&self) -> u8 {
        match self {
            EventKind::CommRequest => 0,
            EventKind::GradientShare(_) => 1,
        }
    }
}

/// A message in flight between two nodes.
#[derive(Debug, Clone, PartialEq)]
pub struct NetEvent {
    pub kind: EventKind,
    pub from: usize,
    pub to: usize,
    pub epoch: u64,
    pub send_tick: u64,
    pub deliver_tick: u64,
}

/// Link delays in samples. A node's messages to itself are never delayed.
#[derive(Debug, Clone, PartialEq)]
pub enum LinkDelays {
    Uniform(u64),
    /// `matrix[from][to]`; the diagonal is ignored.
    PerLink(Vec<Vec<u64>>),
}

#[derive(Debug, Clone, PartialEq)]
pub struct NetConfig {
    pub nodes: usize,
    pub delays: LinkDelays,
}

impl NetConfig {
    pub fn uniform(nodes: usize, delay_samples: u64) -> Self {
        Self {
            nodes,
            delays: LinkDelays::Uniform(delay_samples),
        }
    }

    /// Converts a delay in seconds to whole samples (rounded).
    pub fn uniform_seconds(nodes: usize, delay_s: f64, sample_rate: f64) -> Result<Self> {
        if !(delay_s >= 0.0) || !delay_s.is_finite() {
            return Err(AncError::config(format!("network delay {delay_s} s must be ≥ 0")));
        }
        Ok(Self::uniform(nodes, (delay_s * sample_rate).round() as u64))
    }

    pub fn validate(&self) -> Result<()> {
        if self.nodes == 0 {
            return Err(AncError::config("network needs at least one node"));
        }
        if let LinkDelays::PerLink(m) = &self.delays {
            if m.len() != self.nodes || m.iter().any(|r| r.len() != self.nodes) {
                return Err(AncError::config(format!(
                    "per-link delay matrix must be {0}x{0}",
                    self.nodes
                )));
            }
        }
        Ok(())
    }

    pub fn delay(&self, from: usize, to: usize) -> u64 {
        if from == to {
            return 0;
        }
        match &self.delays {
            LinkDelays::Uniform(d) => *d,
            LinkDelays::PerLink(m) => m[from][to],
        }
    }
}

#[derive(Debug, PartialEq, Eq, PartialOrd, Ord)]
struct QueueKey {
    deliver_tick: u64,
    from: usize,
    kind: u8,
    to: usize,
    seq: u64,
}

/// Delivery queue ordered by `(deliver_tick, from, kind)`, ties broken by
/// recipient and insertion order.
#[derive(Debug, Default)]
pub struct EventQueue {
    heap: BinaryHeap<Reverse<(QueueKey, usize)>>,
    slots: Vec<Option<NetEvent>>,
    free: Vec<usize>,
    seq: u64,
    shared: HashSet<(usize, usize, u64)>,
}

impl EventQueue {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn len(&self) -> usize {
        self.heap.len()
    }

    pub fn is_empty(&self) -> bool {
        self.heap.is_empty()
    }

    /// Enqueues an event whose `deliver_tick` is already set.
    pub fn send(&mut self, evt: NetEvent) -> Result<()> {
        if evt.deliver_tick < evt.send_tick {
            return Err(AncError::protocol(format!(
                "event from node {} delivered at {} before it was sent at {}",
                evt.from, evt.deliver_tick, evt.send_tick
            )));
        }
        if let EventKind::GradientShare(g) = &evt.kind {
            if !self.shared.insert((evt.from, evt.to, g.epoch)) {
                return Err(AncError::protocol(format!(
                    "node {} already shared its epoch {} gradient with node {}",
                    evt.from, g.epoch, evt.to
                )));
            }
        }
        let key = QueueKey {
            deliver_tick: evt.deliver_tick,
            from: evt.from,
            kind: evt.kind.rank(),
            to: evt.to,
            seq: self.seq,
        };
        self.seq += 1;
        let slot = match self.free.pop() {
            Some(i) => {
                self.slots[i] = Some(evt);
                i
            }
            None => {
                self.slots.push(Some(evt));
                self.slots.len() - 1
            }
        };
        self.heap.push(Reverse((key, slot)));
        Ok(())
    }

    /// Removes and returns every event due at `now`, in delivery order.
    ///
    /// Panics if an undelivered event is already overdue: the loop calls
    /// this once per tick, so that can only be a scheduling bug.
    pub fn tick_deliver(&mut self, now: u64) -> Vec<NetEvent> {
        let mut out = Vec::new();
        while let Some(Reverse((key, _))) = self.heap.peek() {
            assert!(
                key.deliver_tick >= now,
                "event due at tick {} still queued at tick {now}",
                key.deliver_tick
            );
            if key.deliver_tick != now {
                break;
            }
            let Reverse((_, slot)) = self.heap.pop().expect("peeked");
            out.push(self.slots[slot].take().expect("queued slot"));
            self.free.push(slot);
        }
        out
    }

    /// Delivery tick of the next queued event.
    pub fn next_due(&self) -> Option<u64> {
        self.heap.peek().map(|Reverse((k, _))| k.deliver_tick)
    }
}

/// Entry of the protocol audit log.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct LogEntry {
    pub tick: u64,
    pub kind: LogKind,
    pub from: usize,
    /// `None` for broadcasts.
    pub to: Option<usize>,
    pub epoch: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum LogKind {
    RequestSent,
    RequestDelivered,
    /// One broadcast of a cumulative gradient to every node.
    GradientSent,
    GradientDelivered,
    /// A node adopted its combined filter.
    Combined,
}

impl LogKind {
    pub fn as_str(self) -> &'static str {
        match self {
            LogKind::RequestSent => "request_sent",
            LogKind::RequestDelivered => "request_delivered",
            LogKind::GradientSent => "gradient_sent",
            LogKind::GradientDelivered => "gradient_delivered",
            LogKind::Combined => "combined",
        }
    }
}
