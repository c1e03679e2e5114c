use crate::combiner::CompensationSet;
use crate::dsp::DelayLine;
use crate::error::{AncError, Result};
use crate::node::{Mode, NodeConfig, NodeState};
use crate::plant::PathMatrix;
use crate::sim::{Controller, ProtocolLog, RnlRecord};

use super::{NetConfig, ProtocolOrchestrator};

/// What opens a combination round.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RoundTrigger {
    /// A node's frame residual noise level rose above the previous frame's.
    Rnl,
    /// A round is started whenever none is active (node 0 triggers).
    EveryTick,
    /// Communication disabled.
    Never,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PcDmcancConfig {
    pub node: NodeConfig,
    pub net: NetConfig,
    pub trigger: RoundTrigger,
}

/// Distributed controller with proactive communication: every node runs
/// local FxLMS and watches its residual noise level; a degradation freezes
/// it and starts a gradient-exchange round over the simulated network.
pub struct PcDmcanc {
    nodes: Vec<NodeState>,
    orchestrator: ProtocolOrchestrator,
    comp: CompensationSet,
    trigger: RoundTrigger,
    rnl: Vec<RnlRecord>,
}

impl PcDmcanc {
    pub fn new(cfg: &PcDmcancConfig, models: &PathMatrix, comp: CompensationSet) -> Result<Self> {
        let k = models.num_nodes();
        if cfg.net.nodes != k || comp.num_nodes() != k {
            return Err(AncError::config(format!(
                "network ({}) and compensation set ({}) must cover all {k} nodes",
                cfg.net.nodes,
                comp.num_nodes()
            )));
        }
        let nodes = (0..k)
            .map(|i| NodeState::new(i, &cfg.node, models.secondary(i, i).clone()))
            .collect::<Result<_>>()?;
        Ok(Self {
            nodes,
            orchestrator: ProtocolOrchestrator::new(cfg.net.clone())?,
            comp,
            trigger: cfg.trigger,
            rnl: Vec::new(),
        })
    }

    pub fn nodes(&self) -> &[NodeState] {
        &self.nodes
    }

    pub fn orchestrator(&self) -> &ProtocolOrchestrator {
        &self.orchestrator
    }
}

impl Controller for PcDmcanc {
    fn label(&self) -> &str {
        "pc-dmcanc"
    }

    fn num_nodes(&self) -> usize {
        self.nodes.len()
    }

    fn reference_len(&self) -> usize {
        self.nodes[0].taps()
    }

    fn control(&mut self, tick: u64, x_history: &DelayLine, y: &mut [f64]) -> Result<()> {
        self.orchestrator.deliver(tick, &mut self.nodes, &self.comp)?;
        for (yk, node) in y.iter_mut().zip(&self.nodes) {
            *yk = node.control_out(x_history);
        }
        Ok(())
    }

    fn update(&mut self, tick: u64, x_n: f64, e: &[f64]) -> Result<()> {
        let mut degraded = Vec::new();
        for (node, &ek) in self.nodes.iter_mut().zip(e) {
            node.filter_reference(x_n);
            node.adapt(ek);
            if let Some(v) = node.rnl_update(ek, tick) {
                self.rnl.push(RnlRecord {
                    tick,
                    node: node.id(),
                    rnl_db: v.rnl_db,
                    mode: node.mode(),
                });
                if v.degraded && node.mode() == Mode::Adaptive {
                    degraded.push(node.id());
                }
            }
        }
        match self.trigger {
            RoundTrigger::Rnl => {
                for k in degraded {
                    self.orchestrator.run_round(k, tick, &mut self.nodes)?;
                }
            }
            RoundTrigger::EveryTick => {
                if !self.orchestrator.round_active() {
                    self.orchestrator.run_round(0, tick, &mut self.nodes)?;
                }
            }
            RoundTrigger::Never => {}
        }
        self.orchestrator.deliver(tick, &mut self.nodes, &self.comp)
    }

    fn filter(&self, k: usize) -> &[f64] {
        self.nodes[k].filter().coeffs()
    }

    fn take_log(&mut self) -> ProtocolLog {
        let (events, rounds) = self.orchestrator.take_records();
        ProtocolLog {
            events,
            rounds,
            rnl: std::mem::take(&mut self.rnl),
        }
    }
}
