//! Lockstep simulation loop shared by every control algorithm.

use crate::dsp::DelayLine;
use crate::error::Result;
use crate::metrics::RunTrace;
use crate::netsim::{LogEntry, RoundRecord};
use crate::node::Mode;
use crate::plant::{PathMatrix, PlantState};

/// One residual-noise frame report.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RnlRecord {
    pub tick: u64,
    pub node: usize,
    pub rnl_db: f64,
    pub mode: Mode,
}

/// Protocol bookkeeping a controller accumulated during a run.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct ProtocolLog {
    pub events: Vec<LogEntry>,
    pub rounds: Vec<RoundRecord>,
    pub rnl: Vec<RnlRecord>,
}

/// A multichannel controller driven one sample at a time.
///
/// Each tick the loop calls [`Controller::control`] to obtain the
/// loudspeaker samples, advances the plant, then hands the resulting error
/// samples to [`Controller::update`].
pub trait Controller: Send {
    fn label(&self) -> &str;

    fn num_nodes(&self) -> usize;

    /// Reference samples the controller needs in its history.
    fn reference_len(&self) -> usize;

    fn control(&mut self, tick: u64, x_history: &DelayLine, y: &mut [f64]) -> Result<()>;

    fn update(&mut self, tick: u64, x_n: f64, e: &[f64]) -> Result<()>;

    /// Current control filter of node `k`.
    fn filter(&self, k: usize) -> &[f64];

    fn take_log(&mut self) -> ProtocolLog {
        ProtocolLog::default()
    }
}

/// Runs `controller` against `paths` for every sample of `reference`.
///
/// `observer` is called after each tick's update with the tick index and the
/// controller, for tests that watch filter trajectories.
pub fn simulate(
    controller: &mut dyn Controller,
    paths: &PathMatrix,
    reference: &[f64],
    sample_rate: f64,
    mut observer: Option<&mut dyn FnMut(u64, &dyn Controller)>,
) -> Result<RunTrace> {
    let k = paths.num_nodes();
    assert_eq!(controller.num_nodes(), k, "controller and plant disagree on K");
    let mut plant = PlantState::new(paths);
    let mut shadow = PlantState::new(paths);
    let mut x_history = DelayLine::new(controller.reference_len().max(1));
    let zeros = vec![0.0; k];
    let mut y = vec![0.0; k];
    let mut e = vec![0.0; k];
    let mut d = vec![0.0; k];
    let mut errors = vec![Vec::with_capacity(reference.len()); k];
    let mut disturbances = vec![Vec::with_capacity(reference.len()); k];

    for (n, &x_n) in reference.iter().enumerate() {
        let tick = n as u64;
        x_history.push(x_n);
        controller.control(tick, &x_history, &mut y)?;
        plant.step(paths, x_n, &y, &mut e);
        shadow.step(paths, x_n, &zeros, &mut d);
        controller.update(tick, x_n, &e)?;
        for i in 0..k {
            errors[i].push(e[i]);
            disturbances[i].push(d[i]);
        }
        if let Some(obs) = observer.as_mut() {
            obs(tick, &*controller);
        }
    }

    let log = controller.take_log();
    Ok(RunTrace {
        label: controller.label().to_string(),
        sample_rate,
        errors,
        disturbances,
        log,
    })
}
