//! Reference controllers: centralized multiple-error FxLMS, decentralized
//! FxLMS with no communication, and mixed-gradient combination with an
//! exchange on every sample.

use crate::combiner::CompensationSet;
use crate::dsp::{axpy, convolve_truncated, dot, DelayLine};
use crate::error::{AncError, Result};
use crate::node::{NodeConfig, NodeState};
use crate::plant::PathMatrix;
use crate::sim::{Controller, ProtocolLog, RnlRecord};

/// One controller adapting all K filters from all K error signals, using
/// the full K x K set of secondary-path models.
#[derive(Debug, Clone)]
pub struct CentralizedState {
    k: usize,
    mu: f64,
    filters: Vec<Vec<f64>>,
    models: PathMatrix,
    x_hist: DelayLine,
    /// `x'_km = s_hat_km * x`, row-major over (k, m), newest first.
    filtered: Vec<DelayLine>,
}

impl CentralizedState {
    pub fn new(taps: usize, mu: f64, models: &PathMatrix) -> Result<Self> {
        if taps == 0 {
            return Err(AncError::config("control filter needs at least one tap"));
        }
        let k = models.num_nodes();
        Ok(Self {
            k,
            mu,
            filters: vec![vec![0.0; taps]; k],
            models: models.clone(),
            x_hist: DelayLine::new(models.secondary_len()),
            filtered: (0..k * k).map(|_| DelayLine::new(taps)).collect(),
        })
    }

    pub fn filters(&self) -> &[Vec<f64>] {
        &self.filters
    }

    /// `y_m = w_m^T x` for every source.
    pub fn control(&self, x_history: &DelayLine, y: &mut [f64]) {
        for (ym, w) in y.iter_mut().zip(&self.filters) {
            *ym = dot(w, &x_history.as_slice()[..w.len()]);
        }
    }

    /// Pushes `x_n` through every path model, then
    /// `w_m += mu * sum_k x'_km e_k`.
    pub fn adapt(&mut self, x_n: f64, e: &[f64]) {
        self.x_hist.push(x_n);
        let xs = self.x_hist.as_slice();
        for row in 0..self.k {
            for col in 0..self.k {
                let fx = dot(self.models.secondary(row, col).coeffs(), xs);
                self.filtered[row * self.k + col].push(fx);
            }
        }
        for col in 0..self.k {
            let w = &mut self.filters[col];
            for (row, &ek) in e.iter().enumerate() {
                axpy(w, self.mu * ek, self.filtered[row * self.k + col].as_slice());
            }
        }
    }
}

/// Emits this tick's control samples, then adapts on `e`.
///
/// In the closed loop the error depends on the control samples; the
/// simulator therefore calls [`CentralizedState::control`] and
/// [`CentralizedState::adapt`] separately around the plant step.
pub fn centralized_step(
    state: &mut CentralizedState,
    x_history: &DelayLine,
    x_n: f64,
    e: &[f64],
) -> Vec<f64> {
    let mut y = vec![0.0; state.k];
    state.control(x_history, &mut y);
    state.adapt(x_n, e);
    y
}

pub struct Centralized {
    state: CentralizedState,
}

impl Centralized {
    pub fn new(taps: usize, mu: f64, models: &PathMatrix) -> Result<Self> {
        Ok(Self {
            state: CentralizedState::new(taps, mu, models)?,
        })
    }
}

impl Controller for Centralized {
    fn label(&self) -> &str {
        "centralized"
    }

    fn num_nodes(&self) -> usize {
        self.state.k
    }

    fn reference_len(&self) -> usize {
        self.state.filters[0].len()
    }

    fn control(&mut self, _tick: u64, x_history: &DelayLine, y: &mut [f64]) -> Result<()> {
        self.state.control(x_history, y);
        Ok(())
    }

    fn update(&mut self, _tick: u64, x_n: f64, e: &[f64]) -> Result<()> {
        self.state.adapt(x_n, e);
        Ok(())
    }

    fn filter(&self, k: usize) -> &[f64] {
        &self.state.filters[k]
    }
}

/// K independent single-channel FxLMS nodes that never communicate.
pub struct Decentralized {
    nodes: Vec<NodeState>,
    rnl: Vec<RnlRecord>,
}

impl Decentralized {
    pub fn new(cfg: &NodeConfig, models: &PathMatrix) -> Result<Self> {
        let nodes = (0..models.num_nodes())
            .map(|k| NodeState::new(k, cfg, models.secondary(k, k).clone()))
            .collect::<Result<_>>()?;
        Ok(Self {
            nodes,
            rnl: Vec::new(),
        })
    }

    pub fn nodes(&self) -> &[NodeState] {
        &self.nodes
    }
}

/// Advances every node by one sample using only its own error.
pub fn decentralized_step(nodes: &mut [NodeState], x_n: f64, e: &[f64]) {
    for (node, &ek) in nodes.iter_mut().zip(e) {
        node.filter_reference(x_n);
        node.adapt(ek);
    }
}

impl Controller for Decentralized {
    fn label(&self) -> &str {
        "decentralized"
    }

    fn num_nodes(&self) -> usize {
        self.nodes.len()
    }

    fn reference_len(&self) -> usize {
        self.nodes[0].taps()
    }

    fn control(&mut self, _tick: u64, x_history: &DelayLine, y: &mut [f64]) -> Result<()> {
        for (yk, node) in y.iter_mut().zip(&self.nodes) {
            *yk = node.control_out(x_history);
        }
        Ok(())
    }

    fn update(&mut self, tick: u64, x_n: f64, e: &[f64]) -> Result<()> {
        decentralized_step(&mut self.nodes, x_n, e);
        for (node, &ek) in self.nodes.iter_mut().zip(e) {
            if let Some(v) = node.rnl_update(ek, tick) {
                self.rnl.push(RnlRecord {
                    tick,
                    node: node.id(),
                    rnl_db: v.rnl_db,
                    mode: node.mode(),
                });
            }
        }
        Ok(())
    }

    fn filter(&self, k: usize) -> &[f64] {
        self.nodes[k].filter().coeffs()
    }

    fn take_log(&mut self) -> ProtocolLog {
        ProtocolLog {
            rnl: std::mem::take(&mut self.rnl),
            ..ProtocolLog::default()
        }
    }
}

/// Every node adapts once per sample, then the one-sample gradients are
/// merged with the compensation filters:
/// `w_k <- w_k + g_k + sum_{m != k} trunc_N(g_m * c_km)`.
///
/// Written directly against the vectors rather than through the node and
/// network modules, so it can serve as an independent check on them.
pub struct IdealMcgd {
    k: usize,
    mu: f64,
    filters: Vec<Vec<f64>>,
    self_models: Vec<Vec<f64>>,
    x_hist: DelayLine,
    filtered: Vec<DelayLine>,
    comp: CompensationSet,
    grads: Vec<Vec<f64>>,
}

impl IdealMcgd {
    pub fn new(taps: usize, mu: f64, models: &PathMatrix, comp: CompensationSet) -> Result<Self> {
        let k = models.num_nodes();
        if comp.num_nodes() != k {
            return Err(AncError::config(format!(
                "compensation set covers {} nodes, plant has {k}",
                comp.num_nodes()
            )));
        }
        if taps == 0 {
            return Err(AncError::config("control filter needs at least one tap"));
        }
        Ok(Self {
            k,
            mu,
            filters: vec![vec![0.0; taps]; k],
            self_models: (0..k).map(|i| models.secondary(i, i).coeffs().to_vec()).collect(),
            x_hist: DelayLine::new(models.secondary_len()),
            filtered: (0..k).map(|_| DelayLine::new(taps)).collect(),
            comp,
            grads: vec![vec![0.0; taps]; k],
        })
    }

    /// One adaptation-plus-combination step.
    pub fn ideal_mcgd_step(&mut self, x_n: f64, e: &[f64]) {
        self.x_hist.push(x_n);
        let taps = self.filters[0].len();
        for i in 0..self.k {
            let fx = dot(&self.self_models[i], self.x_hist.as_slice());
            self.filtered[i].push(fx);
            let scale = self.mu * e[i];
            for (g, x) in self.grads[i].iter_mut().zip(self.filtered[i].as_slice()) {
                *g = scale * x;
            }
        }
        for i in 0..self.k {
            let mut next: Vec<f64> = self.filters[i]
                .iter()
                .zip(&self.grads[i])
                .map(|(w, g)| w + g)
                .collect();
            for m in (0..self.k).filter(|&m| m != i) {
                let c = self.comp.filter(i, m).coeffs();
                for (v, add) in next.iter_mut().zip(convolve_truncated(&self.grads[m], c, taps)) {
                    *v += add;
                }
            }
            self.filters[i] = next;
        }
    }
}

impl Controller for IdealMcgd {
    fn label(&self) -> &str {
        "ideal-mcgd"
    }

    fn num_nodes(&self) -> usize {
        self.k
    }

    fn reference_len(&self) -> usize {
        self.filters[0].len()
    }

    fn control(&mut self, _tick: u64, x_history: &DelayLine, y: &mut [f64]) -> Result<()> {
        for (yk, w) in y.iter_mut().zip(&self.filters) {
            *yk = dot(w, &x_history.as_slice()[..w.len()]);
        }
        Ok(())
    }

    fn update(&mut self, _tick: u64, x_n: f64, e: &[f64]) -> Result<()> {
        self.ideal_mcgd_step(x_n, e);
        Ok(())
    }

    fn filter(&self, k: usize) -> &[f64] {
        &self.filters[k]
    }
}
