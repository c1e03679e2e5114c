//! Noise-reduction metrics over recorded runs: windowed ANSE, Welch power
//! spectra and communication accounting.

use std::f64::consts::PI;

use rustfft::num_complex::Complex;
use rustfft::FftPlanner;

use crate::error::{AncError, Result};
use crate::netsim::LogKind;
use crate::sim::ProtocolLog;

/// Power reported for bins with no energy.
pub const PSD_FLOOR_DB: f64 = -300.0;

/// Everything recorded during one simulated run.
#[derive(Debug, Clone, PartialEq)]
pub struct RunTrace {
    pub label: String,
    pub sample_rate: f64,
    /// `errors[k][n]` is `e_k(n)`.
    pub errors: Vec<Vec<f64>>,
    /// Disturbances from a control-off shadow run with the same inputs.
    pub disturbances: Vec<Vec<f64>>,
    pub log: ProtocolLog,
}

impl RunTrace {
    pub fn num_nodes(&self) -> usize {
        self.errors.len()
    }

    pub fn ticks(&self) -> usize {
        self.errors.first().map_or(0, Vec::len)
    }
}

fn check_window(trace: &RunTrace, window: usize) -> Result<usize> {
    let ticks = trace.ticks();
    if window == 0 {
        return Err(AncError::Metric("ANSE window must be ≥ 1".into()));
    }
    if ticks % window != 0 {
        return Err(AncError::Metric(format!(
            "ANSE window {window} does not divide the {ticks}-sample trace"
        )));
    }
    Ok(ticks / window)
}

fn ratio(e: &[f64], d: &[f64], start: usize) -> Result<f64> {
    let de: f64 = d.iter().map(|v| v * v).sum();
    if de == 0.0 {
        return Err(AncError::Metric(format!(
            "degenerate disturbance window at tick {start}"
        )));
    }
    Ok(e.iter().map(|v| v * v).sum::<f64>() / de)
}

/// `10 log10( (1/K) sum_k sum e_k^2 / sum d_k^2 )` over consecutive windows.
pub fn anse_curve(trace: &RunTrace, window: usize) -> Result<Vec<f64>> {
    let windows = check_window(trace, window)?;
    let k = trace.num_nodes() as f64;
    (0..windows)
        .map(|w| {
            let range = w * window..(w + 1) * window;
            let mut total = 0.0;
            for (e, d) in trace.errors.iter().zip(&trace.disturbances) {
                total += ratio(&e[range.clone()], &d[range.clone()], range.start)?;
            }
            Ok(10.0 * (total / k).log10())
        })
        .collect()
}

/// Per-node normalized squared error in dB over consecutive windows.
pub fn node_nse_curve(trace: &RunTrace, node: usize, window: usize) -> Result<Vec<f64>> {
    let windows = check_window(trace, window)?;
    let e = &trace.errors[node];
    let d = &trace.disturbances[node];
    (0..windows)
        .map(|w| {
            let range = w * window..(w + 1) * window;
            Ok(10.0 * ratio(&e[range.clone()], &d[range.clone()], range.start)?.log10())
        })
        .collect()
}

/// ANSE with the expectation taken over the final `tail` samples.
pub fn steady_state_anse(trace: &RunTrace, tail: usize) -> Result<f64> {
    let ticks = trace.ticks();
    if tail == 0 || tail > ticks {
        return Err(AncError::Metric(format!(
            "steady-state tail {tail} outside a {ticks}-sample trace"
        )));
    }
    let start = ticks - tail;
    let mut total = 0.0;
    for (e, d) in trace.errors.iter().zip(&trace.disturbances) {
        total += ratio(&e[start..], &d[start..], start)?;
    }
    Ok(10.0 * (total / trace.num_nodes() as f64).log10())
}

/// One-sided averaged periodogram.
#[derive(Debug, Clone, PartialEq)]
pub struct Psd {
    pub freqs: Vec<f64>,
    pub power_db: Vec<f64>,
    /// Linear power per bin, scaled so a sinusoid centred on a bin reads
    /// its mean power `A^2 / 2`.
    pub power: Vec<f64>,
    /// Equivalent noise bandwidth of the window in bins.
    pub enbw_bins: f64,
    pub segments: usize,
}

impl Psd {
    pub fn iter(&self) -> impl Iterator<Item = (f64, f64)> + '_ {
        self.freqs.iter().copied().zip(self.power_db.iter().copied())
    }

    /// Total signal power with the window's noise bandwidth removed.
    pub fn total_power(&self) -> f64 {
        self.power.iter().sum::<f64>() / self.enbw_bins
    }
}

/// Welch estimate with a periodic Hann window. `overlap` is the fraction of
/// a segment shared with the next one.
pub fn welch_psd(signal: &[f64], segment: usize, overlap: f64, sample_rate: f64) -> Result<Psd> {
    if signal.is_empty() {
        return Err(AncError::Metric("cannot estimate the spectrum of an empty signal".into()));
    }
    if segment < 2 || segment > signal.len() {
        return Err(AncError::Metric(format!(
            "segment {segment} must be in [2, {}]",
            signal.len()
        )));
    }
    if !(0.0..1.0).contains(&overlap) {
        return Err(AncError::Metric(format!("overlap {overlap} outside [0, 1)")));
    }
    let hop = ((segment as f64) * (1.0 - overlap)).round().max(1.0) as usize;
    let window: Vec<f64> = (0..segment)
        .map(|n| 0.5 - 0.5 * (2.0 * PI * n as f64 / segment as f64).cos())
        .collect();
    let sum_w: f64 = window.iter().sum();
    let sum_w2: f64 = window.iter().map(|w| w * w).sum();

    let fft = FftPlanner::<f64>::new().plan_fft_forward(segment);
    let bins = segment / 2 + 1;
    let mut acc = vec![0.0; bins];
    let mut buf = vec![Complex::new(0.0, 0.0); segment];
    let mut segments = 0;
    let mut start = 0;
    while start + segment <= signal.len() {
        for ((b, &x), &w) in buf.iter_mut().zip(&signal[start..start + segment]).zip(&window) {
            *b = Complex::new(x * w, 0.0);
        }
        fft.process(&mut buf);
        for (a, c) in acc.iter_mut().zip(&buf) {
            *a += c.norm_sqr();
        }
        segments += 1;
        start += hop;
    }

    let scale = 1.0 / (segments as f64 * sum_w * sum_w);
    let power: Vec<f64> = acc
        .iter()
        .enumerate()
        .map(|(i, a)| {
            let one_sided = if i == 0 || (segment % 2 == 0 && i == segment / 2) { 1.0 } else { 2.0 };
            a * scale * one_sided
        })
        .collect();
    let power_db = power
        .iter()
        .map(|&p| if p > 0.0 { (10.0 * p.log10()).max(PSD_FLOOR_DB) } else { PSD_FLOOR_DB })
        .collect();
    Ok(Psd {
        freqs: (0..bins).map(|i| i as f64 * sample_rate / segment as f64).collect(),
        power_db,
        power,
        enbw_bins: segment as f64 * sum_w2 / (sum_w * sum_w),
        segments,
    })
}

/// Gradient-exchange accounting relative to exchanging every sample.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CommStats {
    /// Gradient broadcasts.
    pub events: usize,
    pub events_per_sample: f64,
    /// `1 - events_per_sample / K`.
    pub reduction_vs_per_sample: f64,
    pub rounds: usize,
}

pub fn comm_stats(trace: &RunTrace) -> CommStats {
    let events = trace
        .log
        .events
        .iter()
        .filter(|e| e.kind == LogKind::GradientSent)
        .count();
    let ticks = trace.ticks().max(1) as f64;
    let eps = events as f64 / ticks;
    CommStats {
        events,
        events_per_sample: eps,
        reduction_vs_per_sample: 1.0 - eps / trace.num_nodes().max(1) as f64,
        rounds: trace.log.rounds.len(),
    }
}
