//! A single ANC node: control output, filtered-reference FxLMS adaptation,
//! frame-averaged residual-noise monitoring and the adaptive/fixed mode
//! machine that drives gradient exchange.

use crate::combiner::CumulativeGradient;
use crate::dsp::{axpy, dot, DelayLine, FirFilter};
use crate::error::{AncError, Result};

/// Residual noise level reported for an all-zero frame.
pub const RNL_FLOOR_DB: f64 = -200.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Mode {
    /// Running FxLMS every sample.
    Adaptive,
    /// Frozen after a non-finite error sample. Never leaves this state.
    Fixed,
    /// Frozen while a combination round is in flight.
    AwaitingCombine,
}

impl Mode {
    pub fn as_str(self) -> &'static str {
        match self {
            Mode::Adaptive => "adaptive",
            Mode::Fixed => "fixed",
            Mode::AwaitingCombine => "awaiting_combine",
        }
    }
}

/// End-of-frame residual noise report.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FrameVerdict {
    /// Last tick of the frame.
    pub tick: u64,
    pub rnl_db: f64,
    /// The frame is louder than the previous one by more than the hysteresis.
    pub degraded: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct NodeConfig {
    /// Control filter taps `N`.
    pub taps: usize,
    pub mu: f64,
    /// Samples per residual-noise frame (`T * f`).
    pub frame_len: usize,
    pub hysteresis_db: f64,
}

#[derive(Debug, Clone)]
pub struct NodeState {
    id: usize,
    w: FirFilter,
    w_snapshot: FirFilter,
    s_hat: FirFilter,
    /// Raw reference history for the secondary-path model.
    x_hist: DelayLine,
    /// Filtered reference `x'_kk`, newest first, length `N`.
    fx_history: DelayLine,
    mu: f64,
    mode: Mode,
    diverged: bool,
    rnl_acc: f64,
    frame_fill: usize,
    frame_len: usize,
    rnl_prev: Option<f64>,
    /// The open frame straddles a combination and must not become the
    /// next baseline.
    frame_straddles_combine: bool,
    hysteresis_db: f64,
}

impl NodeState {
    pub fn new(id: usize, cfg: &NodeConfig, s_hat: FirFilter) -> Result<Self> {
        let mut errors = Vec::new();
        if cfg.taps == 0 {
            errors.push("control filter needs at least one tap".to_string());
        }
        if cfg.frame_len == 0 {
            errors.push("frame_len must be ≥ 1".to_string());
        }
        if !cfg.mu.is_finite() || cfg.mu < 0.0 {
            errors.push(format!("step size {} must be finite and non-negative", cfg.mu));
        }
        if !cfg.hysteresis_db.is_finite() || cfg.hysteresis_db < 0.0 {
            errors.push(format!("hysteresis {} dB must be non-negative", cfg.hysteresis_db));
        }
        if !errors.is_empty() {
            return Err(AncError::Config(errors));
        }
        Ok(Self {
            id,
            w: FirFilter::zeros(cfg.taps),
            w_snapshot: FirFilter::zeros(cfg.taps),
            x_hist: DelayLine::new(s_hat.len()),
            s_hat,
            fx_history: DelayLine::new(cfg.taps),
            mu: cfg.mu,
            mode: Mode::Adaptive,
            diverged: false,
            rnl_acc: 0.0,
            frame_fill: 0,
            frame_len: cfg.frame_len,
            rnl_prev: None,
            frame_straddles_combine: false,
            hysteresis_db: cfg.hysteresis_db,
        })
    }

    pub fn id(&self) -> usize {
        self.id
    }

    pub fn taps(&self) -> usize {
        self.w.len()
    }

    pub fn mode(&self) -> Mode {
        self.mode
    }

    /// Set once a non-finite error sample froze the node.
    pub fn diverged(&self) -> bool {
        self.diverged
    }

    pub fn filter(&self) -> &FirFilter {
        &self.w
    }

    pub fn snapshot(&self) -> &FirFilter {
        &self.w_snapshot
    }

    pub fn secondary_model(&self) -> &FirFilter {
        &self.s_hat
    }

    pub fn filtered_reference(&self) -> &DelayLine {
        &self.fx_history
    }

    pub fn previous_rnl(&self) -> Option<f64> {
        self.rnl_prev
    }

    /// `y_k(n) = w^T x(n)`. Produced in every mode.
    pub fn control_out(&self, x_history: &DelayLine) -> f64 {
        let taps = self.w.coeffs();
        assert!(
            x_history.len() >= taps.len(),
            "reference history shorter than the control filter"
        );
        dot(taps, &x_history.as_slice()[..taps.len()])
    }

    /// Pushes `x'(n) = (s_hat * x)(n)` into the filtered-reference history.
    pub fn filter_reference(&mut self, x_n: f64) -> f64 {
        self.x_hist.push(x_n);
        let fx = dot(self.s_hat.coeffs(), self.x_hist.as_slice());
        self.fx_history.push(fx);
        fx
    }

    /// FxLMS update `w += mu * x' * e`. A no-op outside adaptive mode.
    /// A non-finite error sample freezes the node instead.
    pub fn adapt(&mut self, e_k: f64) {
        if self.mode != Mode::Adaptive {
            return;
        }
        if !e_k.is_finite() {
            self.mode = Mode::Fixed;
            self.diverged = true;
            return;
        }
        if e_k == 0.0 {
            return;
        }
        axpy(self.w.coeffs_mut(), self.mu * e_k, self.fx_history.as_slice());
    }

    /// Accumulates `e^2` and, on the last sample of a frame, reports the
    /// frame's residual noise level in dB.
    pub fn rnl_update(&mut self, e_k: f64, tick: u64) -> Option<FrameVerdict> {
        if e_k.is_finite() {
            self.rnl_acc += e_k * e_k;
        }
        self.frame_fill += 1;
        if self.frame_fill < self.frame_len {
            return None;
        }
        let mean = self.rnl_acc / self.frame_len as f64;
        let rnl_db = if mean > 0.0 {
            (10.0 * mean.log10()).max(RNL_FLOOR_DB)
        } else {
            RNL_FLOOR_DB
        };
        let degraded = self
            .rnl_prev
            .is_some_and(|prev| rnl_db > prev + self.hysteresis_db);
        self.rnl_prev = if self.frame_straddles_combine {
            None
        } else {
            Some(rnl_db)
        };
        self.frame_straddles_combine = false;
        self.rnl_acc = 0.0;
        self.frame_fill = 0;
        Some(FrameVerdict {
            tick,
            rnl_db,
            degraded,
        })
    }

    /// `w - w'` without touching the mode.
    pub fn cumulative_gradient(&self, epoch: u64) -> CumulativeGradient {
        let phi = self
            .w
            .coeffs()
            .iter()
            .zip(self.w_snapshot.coeffs())
            .map(|(w, s)| w - s)
            .collect();
        CumulativeGradient {
            node_id: self.id,
            phi,
            epoch,
        }
    }

    /// Freezes the filter and returns the gradient accumulated since the last
    /// communication.
    pub fn enter_fixed_and_snapshot_gradient(&mut self, epoch: u64) -> Result<CumulativeGradient> {
        if self.mode != Mode::Adaptive {
            return Err(AncError::protocol(format!(
                "node {} asked to snapshot while {}",
                self.id,
                self.mode.as_str()
            )));
        }
        self.mode = Mode::AwaitingCombine;
        Ok(self.cumulative_gradient(epoch))
    }

    /// Adopts the combined filter, refreshes the snapshot and resumes
    /// adaptation with a fresh residual-noise baseline.
    pub fn apply_combined(&mut self, w_new: FirFilter) -> Result<()> {
        if self.mode != Mode::AwaitingCombine {
            return Err(AncError::protocol(format!(
                "node {} got a combined filter while {}",
                self.id,
                self.mode.as_str()
            )));
        }
        if w_new.len() != self.w.len() {
            return Err(AncError::protocol(format!(
                "combined filter has {} taps, node {} uses {}",
                w_new.len(),
                self.id,
                self.w.len()
            )));
        }
        self.w_snapshot = w_new.clone();
        self.w = w_new;
        self.mode = Mode::Adaptive;
        self.rnl_prev = None;
        self.frame_straddles_combine = self.frame_fill > 0;
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dsp::{fir_convolve_step, FirFilter};
    use crate::plant::{synth_paths, PlantState};
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn cfg(taps: usize) -> NodeConfig {
        NodeConfig {
            taps,
            mu: 0.01,
            frame_len: 4,
            hysteresis_db: 0.0,
        }
    }

    fn node(taps: usize, s_hat: Vec<f64>) -> NodeState {
        NodeState::new(0, &cfg(taps), FirFilter::new(s_hat).unwrap()).unwrap()
    }

    #[test]
    fn control_out_examples() {
        let mut n = node(3, vec![1.0]);
        let mut hist = DelayLine::new(3);
        hist.push(5.0);
        assert_eq!(n.control_out(&hist), 0.0);
        n.w.coeffs_mut()[0] = 1.0;
        assert_eq!(n.control_out(&hist), 5.0);

        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for (i, c) in n.w.coeffs_mut().iter_mut().enumerate() {
            *c = rng.gen_range(-1.0..1.0) + i as f64;
        }
        for _ in 0..5 {
            hist.push(rng.gen_range(-1.0..1.0));
            assert_eq!(n.control_out(&hist), fir_convolve_step(n.filter(), &hist));
        }
    }

    #[test]
    fn filter_reference_delta_and_delay() {
        let mut a = node(2, vec![1.0]);
        let mut b = node(2, vec![0.0, 1.0]);
        let xs = [0.5, -1.0, 2.0, 3.0];
        let mut prev = 0.0;
        for &x in &xs {
            assert_eq!(a.filter_reference(x), x);
            assert_eq!(b.filter_reference(x), prev);
            prev = x;
        }
    }

    #[test]
    fn filter_reference_matches_full_convolution() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let s: Vec<f64> = (0..16).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let x: Vec<f64> = (0..100).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let mut n = node(4, s.clone());
        for t in 0..x.len() {
            let want: f64 = (0..s.len()).filter(|&i| i <= t).map(|i| s[i] * x[t - i]).sum();
            assert!((n.filter_reference(x[t]) - want).abs() < 1e-12);
        }
    }

    #[test]
    fn adapt_examples() {
        let mut n = node(2, vec![1.0]);
        n.filter_reference(1.0);
        n.adapt(0.0);
        assert_eq!(n.filter().coeffs(), &[0.0, 0.0]);

        // fx_history = [1, 0], mu = 0.01, e = 2
        n.adapt(2.0);
        let want = [0.0 + 0.01 * 1.0 * 2.0, 0.0 + 0.01 * 0.0 * 2.0];
        assert_eq!(n.filter().coeffs(), &want);
        assert_eq!(want, [0.02, 0.0]);

        n.mode = Mode::AwaitingCombine;
        n.adapt(100.0);
        assert_eq!(n.filter().coeffs(), &want);
    }

    #[test]
    fn non_finite_error_freezes_node() {
        let mut n = node(2, vec![1.0]);
        n.filter_reference(1.0);
        n.adapt(f64::NAN);
        assert_eq!(n.mode(), Mode::Fixed);
        assert!(n.diverged());
        n.adapt(1.0);
        assert_eq!(n.filter().coeffs(), &[0.0, 0.0]);
    }

    #[test]
    fn rnl_of_constant_frame() {
        let mut n = node(2, vec![1.0]);
        let mut verdict = None;
        for t in 0..4 {
            verdict = n.rnl_update(0.1, t);
        }
        let v = verdict.unwrap();
        assert!((v.rnl_db - -20.0).abs() <= 1e-12);
        assert!(!v.degraded);
    }

    fn frame_with_rnl(n: &mut NodeState, db: f64, start: u64) -> FrameVerdict {
        let amp = 10f64.powf(db / 20.0);
        (0..4).filter_map(|t| n.rnl_update(amp, start + t)).last().unwrap()
    }

    #[test]
    fn rnl_comparison_rule() {
        let mut n = node(2, vec![1.0]);
        assert!(!frame_with_rnl(&mut n, -10.0, 0).degraded);
        assert!(!frame_with_rnl(&mut n, -12.0, 4).degraded);
        assert!(frame_with_rnl(&mut n, -11.0, 8).degraded);
    }

    #[test]
    fn hysteresis_suppresses_small_increases() {
        let mut n = NodeState::new(
            0,
            &NodeConfig {
                hysteresis_db: 2.0,
                ..cfg(2)
            },
            FirFilter::new(vec![1.0]).unwrap(),
        )
        .unwrap();
        frame_with_rnl(&mut n, -12.0, 0);
        assert!(!frame_with_rnl(&mut n, -11.0, 4).degraded);
        assert!(frame_with_rnl(&mut n, -8.0, 8).degraded);
    }

    #[test]
    fn silent_frame_clamps_to_floor() {
        let mut n = node(2, vec![1.0]);
        let v = (0..4).filter_map(|t| n.rnl_update(0.0, t)).last().unwrap();
        assert_eq!(v.rnl_db, RNL_FLOOR_DB);
    }

    #[test]
    fn snapshot_gradient_examples() {
        let mut n = node(2, vec![1.0]);
        let g = n.enter_fixed_and_snapshot_gradient(0).unwrap();
        assert_eq!(g.phi, vec![0.0, 0.0]);
        assert_eq!(n.mode(), Mode::AwaitingCombine);
        assert!(n.enter_fixed_and_snapshot_gradient(0).is_err());

        let mut n = node(2, vec![1.0]);
        n.w = FirFilter::new(vec![1.0, 2.0]).unwrap();
        n.w_snapshot = FirFilter::new(vec![0.5, 2.0]).unwrap();
        assert_eq!(n.enter_fixed_and_snapshot_gradient(3).unwrap().phi, vec![0.5, 0.0]);
    }

    #[test]
    fn apply_combined_examples() {
        let mut n = node(2, vec![1.0]);
        assert!(n.apply_combined(FirFilter::zeros(2)).is_err());

        n.w = FirFilter::new(vec![0.3, 0.1]).unwrap();
        n.enter_fixed_and_snapshot_gradient(0).unwrap();
        assert!(n.apply_combined(FirFilter::zeros(3)).is_err());
        let same = n.filter().clone();
        n.apply_combined(same.clone()).unwrap();
        assert_eq!(n.mode(), Mode::Adaptive);
        assert_eq!(n.snapshot(), &same);
        assert_eq!(n.previous_rnl(), None);
        assert_eq!(n.enter_fixed_and_snapshot_gradient(1).unwrap().phi, vec![0.0, 0.0]);
    }

    #[test]
    fn frame_straddling_a_combination_is_not_a_baseline() {
        let mut n = node(2, vec![1.0]);
        frame_with_rnl(&mut n, -20.0, 0);
        n.enter_fixed_and_snapshot_gradient(0).unwrap();
        // Three samples of a frame, combine, then the frame closes.
        for t in 4..7 {
            assert!(n.rnl_update(0.1, t).is_none());
        }
        n.apply_combined(n.filter().clone()).unwrap();
        assert!(!n.rnl_update(0.1, 7).unwrap().degraded);
        assert_eq!(n.previous_rnl(), None);
        // First whole frame after the combination sets the baseline.
        assert!(!frame_with_rnl(&mut n, -5.0, 8).degraded);
        assert!(frame_with_rnl(&mut n, -4.0, 12).degraded);
    }

    #[test]
    fn combination_on_a_frame_boundary_keeps_the_next_frame() {
        let mut n = node(2, vec![1.0]);
        frame_with_rnl(&mut n, -20.0, 0);
        n.enter_fixed_and_snapshot_gradient(0).unwrap();
        n.apply_combined(n.filter().clone()).unwrap();
        assert!(!frame_with_rnl(&mut n, -5.0, 4).degraded);
        assert_eq!(n.previous_rnl(), Some(-5.0));
        assert!(frame_with_rnl(&mut n, -4.0, 8).degraded);
    }

    #[test]
    fn gradient_equals_sum_of_updates() {
        let paths = synth_paths(1, 32, 16, 4, 0.0).unwrap();
        let mut plant = PlantState::new(&paths);
        let cfg = NodeConfig {
            taps: 32,
            mu: 0.002,
            frame_len: 100,
            hysteresis_db: 0.0,
        };
        let mut n = NodeState::new(0, &cfg, paths.secondary(0, 0).clone()).unwrap();
        let mut xh = DelayLine::new(32);
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let mut summed = vec![0.0; 32];
        let mut e = [0.0];
        for _ in 0..1000 {
            let x: f64 = rng.gen_range(-1.0..1.0);
            xh.push(x);
            let y = n.control_out(&xh);
            plant.step(&paths, x, &[y], &mut e);
            n.filter_reference(x);
            for (s, fx) in summed.iter_mut().zip(n.filtered_reference().as_slice()) {
                *s += cfg.mu * fx * e[0];
            }
            n.adapt(e[0]);
        }
        let phi = n.enter_fixed_and_snapshot_gradient(0).unwrap().phi;
        for (a, b) in phi.iter().zip(&summed) {
            assert!((a - b).abs() <= 1e-12);
        }
    }

    #[derive(Debug, Clone)]
    enum Event {
        Tick(f64),
        Snapshot,
        Apply,
        Diverge,
    }

    fn event() -> impl Strategy<Value = Event> {
        prop_oneof![
            4 => (-1.0f64..1.0).prop_map(Event::Tick),
            1 => Just(Event::Snapshot),
            1 => Just(Event::Apply),
            1 => Just(Event::Diverge),
        ]
    }

    proptest! {
        #[test]
        fn mode_machine_only_takes_allowed_transitions(events in prop::collection::vec(event(), 1..200)) {
            let mut n = node(4, vec![0.5, 0.25]);
            for ev in events {
                let before = n.mode();
                let w_before = n.filter().clone();
                let result = match ev {
                    Event::Tick(v) => {
                        n.filter_reference(v);
                        n.adapt(v);
                        n.rnl_update(v, 0);
                        Ok(())
                    }
                    Event::Snapshot => n.enter_fixed_and_snapshot_gradient(0).map(|_| ()),
                    Event::Apply => n.apply_combined(n.filter().clone()),
                    Event::Diverge => {
                        n.adapt(f64::INFINITY);
                        Ok(())
                    }
                };
                let after = n.mode();
                let allowed = before == after
                    || matches!(
                        (before, after),
                        (Mode::Adaptive, Mode::AwaitingCombine)
                            | (Mode::AwaitingCombine, Mode::Adaptive)
                            | (Mode::Adaptive, Mode::Fixed)
                    );
                prop_assert!(allowed, "{before:?} -> {after:?}");
                if result.is_err() {
                    prop_assert_eq!(before, after);
                }
                if before != Mode::Adaptive && matches!(ev, Event::Tick(_) | Event::Diverge) {
                    prop_assert_eq!(&w_before, n.filter());
                }
                prop_assert!(n.rnl_acc >= 0.0);
            }
        }
    }
}
