use crate::combiner::{mcgd_combine, CompensationSet, CumulativeGradient};
use crate::error::{AncError, Result};
use crate::node::{Mode, NodeState};

use super::{EventKind, EventQueue, LogEntry, LogKind, NetConfig, NetEvent};

/// Identifies a combination round.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct RoundHandle {
    pub epoch: u64,
}

/// Timeline of one combination round.
#[derive(Debug, Clone, PartialEq)]
pub struct RoundRecord {
    pub epoch: u64,
    pub trigger: usize,
    pub start_tick: u64,
    /// Other nodes whose own degradation was folded into this round.
    pub coalesced: Vec<usize>,
    /// Tick at which each node froze its filter and shared its gradient.
    pub snapshot_tick: Vec<Option<u64>>,
    /// Tick at which each node adopted its combined filter.
    pub apply_tick: Vec<Option<u64>>,
    pub end_tick: Option<u64>,
}

#[derive(Debug)]
struct ActiveRound {
    epoch: u64,
    record: usize,
    inbox: Vec<Vec<Option<CumulativeGradient>>>,
    shared: Vec<bool>,
    done: Vec<bool>,
}

/// Runs combination rounds over the simulated network: broadcast of the
/// request, gradient exchange, and per-node combination once a node holds
/// every gradient of the epoch. At most one round is active at a time.
#[derive(Debug)]
pub struct ProtocolOrchestrator {
    net: NetConfig,
    queue: EventQueue,
    next_epoch: u64,
    active: Option<ActiveRound>,
    log: Vec<LogEntry>,
    rounds: Vec<RoundRecord>,
}

impl ProtocolOrchestrator {
    pub fn new(net: NetConfig) -> Result<Self> {
        net.validate()?;
        Ok(Self {
            net,
            queue: EventQueue::new(),
            next_epoch: 0,
            active: None,
            log: Vec::new(),
            rounds: Vec::new(),
        })
    }

    pub fn net(&self) -> &NetConfig {
        &self.net
    }

    pub fn round_active(&self) -> bool {
        self.active.is_some()
    }

    pub fn log(&self) -> &[LogEntry] {
        &self.log
    }

    pub fn rounds(&self) -> &[RoundRecord] {
        &self.rounds
    }

    pub fn take_records(&mut self) -> (Vec<LogEntry>, Vec<RoundRecord>) {
        (std::mem::take(&mut self.log), std::mem::take(&mut self.rounds))
    }

    /// Starts a round triggered by `trigger` at tick `now`: the trigger
    /// freezes, broadcasts a request and shares its gradient. A trigger
    /// while a round is active joins that round instead of opening a new
    /// epoch.
    pub fn run_round(&mut self, trigger: usize, now: u64, nodes: &mut [NodeState]) -> Result<RoundHandle> {
        if trigger >= nodes.len() {
            return Err(AncError::protocol(format!("unknown trigger node {trigger}")));
        }
        if let Some(active) = &self.active {
            let epoch = active.epoch;
            let record = active.record;
            if nodes[trigger].mode() == Mode::Adaptive {
                self.rounds[record].coalesced.push(trigger);
                self.share(trigger, now, nodes)?;
            }
            return Ok(RoundHandle { epoch });
        }

        let k = nodes.len();
        let epoch = self.next_epoch;
        self.next_epoch += 1;
        self.rounds.push(RoundRecord {
            epoch,
            trigger,
            start_tick: now,
            coalesced: Vec::new(),
            snapshot_tick: vec![None; k],
            apply_tick: vec![None; k],
            end_tick: None,
        });
        self.active = Some(ActiveRound {
            epoch,
            record: self.rounds.len() - 1,
            inbox: vec![vec![None; k]; k],
            shared: vec![false; k],
            done: vec![false; k],
        });

        self.log.push(LogEntry {
            tick: now,
            kind: LogKind::RequestSent,
            from: trigger,
            to: None,
            epoch,
        });
        for to in (0..k).filter(|&to| to != trigger) {
            self.queue.send(NetEvent {
                kind: EventKind::CommRequest,
                from: trigger,
                to,
                epoch,
                send_tick: now,
                deliver_tick: now + self.net.delay(trigger, to),
            })?;
        }
        self.share(trigger, now, nodes)?;
        Ok(RoundHandle { epoch })
    }

    /// Freezes node `j` (if adaptive) and broadcasts its cumulative gradient
    /// for the active epoch, at most once per round.
    fn share(&mut self, j: usize, now: u64, nodes: &mut [NodeState]) -> Result<()> {
        let active = self.active.as_mut().expect("share outside a round");
        if active.shared[j] {
            return Ok(());
        }
        let epoch = active.epoch;
        let grad = match nodes[j].mode() {
            Mode::Adaptive => {
                let g = nodes[j].enter_fixed_and_snapshot_gradient(epoch)?;
                self.rounds[active.record].snapshot_tick[j] = Some(now);
                g
            }
            // A diverged node still reports where it stopped.
            Mode::Fixed => nodes[j].cumulative_gradient(epoch),
            Mode::AwaitingCombine => {
                return Err(AncError::protocol(format!(
                    "node {j} is awaiting a combination it never shared for"
                )))
            }
        };
        active.shared[j] = true;
        self.log.push(LogEntry {
            tick: now,
            kind: LogKind::GradientSent,
            from: j,
            to: None,
            epoch,
        });
        for to in 0..nodes.len() {
            self.queue.send(NetEvent {
                kind: EventKind::GradientShare(grad.clone()),
                from: j,
                to,
                epoch,
                send_tick: now,
                deliver_tick: now + self.net.delay(j, to),
            })?;
        }
        Ok(())
    }

    /// Delivers everything due at `now`, including messages sent while
    /// handling this tick's deliveries over zero-delay links.
    pub fn deliver(&mut self, now: u64, nodes: &mut [NodeState], comp: &CompensationSet) -> Result<()> {
        loop {
            let due = self.queue.tick_deliver(now);
            if due.is_empty() {
                return Ok(());
            }
            for evt in due {
                self.handle(evt, now, nodes, comp)?;
            }
        }
    }

    fn handle(&mut self, evt: NetEvent, now: u64, nodes: &mut [NodeState], comp: &CompensationSet) -> Result<()> {
        let to = evt.to;
        match evt.kind {
            EventKind::CommRequest => {
                self.log.push(LogEntry {
                    tick: now,
                    kind: LogKind::RequestDelivered,
                    from: evt.from,
                    to: Some(to),
                    epoch: evt.epoch,
                });
                if self.active.as_ref().is_some_and(|a| a.epoch == evt.epoch) {
                    self.share(to, now, nodes)?;
                }
            }
            EventKind::GradientShare(grad) => {
                self.log.push(LogEntry {
                    tick: now,
                    kind: LogKind::GradientDelivered,
                    from: evt.from,
                    to: Some(to),
                    epoch: evt.epoch,
                });
                let active = self.active.as_mut().ok_or_else(|| {
                    AncError::protocol(format!("gradient for epoch {} arrived outside a round", evt.epoch))
                })?;
                if active.epoch != grad.epoch {
                    return Err(AncError::protocol(format!(
                        "gradient for epoch {} arrived during epoch {}",
                        grad.epoch, active.epoch
                    )));
                }
                let slot = &mut active.inbox[to][evt.from];
                if slot.is_some() {
                    return Err(AncError::protocol(format!(
                        "node {to} received two epoch {} gradients from node {}",
                        grad.epoch, evt.from
                    )));
                }
                *slot = Some(grad);
                if active.inbox[to].iter().all(Option::is_some) {
                    self.complete_node(to, now, nodes, comp)?;
                }
            }
        }
        Ok(())
    }

    fn complete_node(&mut self, j: usize, now: u64, nodes: &mut [NodeState], comp: &CompensationSet) -> Result<()> {
        let active = self.active.as_mut().expect("active round");
        let epoch = active.epoch;
        if nodes[j].mode() == Mode::AwaitingCombine {
            let grads: Vec<CumulativeGradient> = active.inbox[j].iter().flatten().cloned().collect();
            let w_new = mcgd_combine(j, nodes[j].snapshot(), &grads, comp)?;
            nodes[j].apply_combined(w_new)?;
            self.rounds[active.record].apply_tick[j] = Some(now);
            self.log.push(LogEntry {
                tick: now,
                kind: LogKind::Combined,
                from: j,
                to: Some(j),
                epoch,
            });
        }
        active.done[j] = true;
        if active.done.iter().all(|&d| d) {
            self.rounds[active.record].end_tick = Some(now);
            self.active = None;
        }
        Ok(())
    }
}
