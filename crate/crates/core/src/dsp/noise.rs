//! Seeded reference-noise sources.

use std::f64::consts::PI;
use std::sync::Arc;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{AncError, Result};

/// Order of the windowed-sinc band-pass used to shape white noise.
pub const BANDPASS_ORDER: usize = 768;

#[derive(Debug, Clone, PartialEq)]
pub enum NoiseKind {
    /// Gaussian white noise band-limited to `[f_lo, f_hi]` Hz.
    BandLimitedWhite { f_lo: f64, f_hi: f64 },
    /// Unshaped Gaussian white noise.
    White,
    /// Playback of a recording, looped when the run is longer than the file.
    FilePlayback { samples: Arc<Vec<f64>> },
}

/// A reproducible reference signal.
#[derive(Debug, Clone, PartialEq)]
pub struct NoiseSource {
    pub kind: NoiseKind,
    pub seed: u64,
    pub sample_rate: f64,
}

impl NoiseSource {
    pub fn band_limited(f_lo: f64, f_hi: f64, sample_rate: f64, seed: u64) -> Result<Self> {
        let src = Self {
            kind: NoiseKind::BandLimitedWhite { f_lo, f_hi },
            seed,
            sample_rate,
        };
        src.validate()?;
        Ok(src)
    }

    pub fn white(sample_rate: f64, seed: u64) -> Self {
        Self {
            kind: NoiseKind::White,
            seed,
            sample_rate,
        }
    }

    pub fn playback(samples: Vec<f64>, sample_rate: f64) -> Self {
        Self {
            kind: NoiseKind::FilePlayback {
                samples: Arc::new(samples),
            },
            seed: 0,
            sample_rate,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.sample_rate > 0.0) {
            return Err(AncError::config("noise sample_rate must be positive"));
        }
        match &self.kind {
            NoiseKind::BandLimitedWhite { f_lo, f_hi } => {
                let nyquist = self.sample_rate / 2.0;
                if !(0.0 < *f_lo && f_lo < f_hi && *f_hi < nyquist) {
                    return Err(AncError::config(format!(
                        "noise band [{f_lo}, {f_hi}] Hz must satisfy 0 < f_lo < f_hi < {nyquist}"
                    )));
                }
            }
            NoiseKind::FilePlayback { samples } if samples.is_empty() => {
                return Err(AncError::config("noise recording contains no samples"));
            }
            _ => {}
        }
        Ok(())
    }

    /// Generates `n_samples` of reference signal, normalized to unit variance
    /// over the returned block.
    pub fn generate(&self, n_samples: usize) -> Result<Vec<f64>> {
        self.validate()?;
        if n_samples == 0 {
            return Ok(Vec::new());
        }
        let raw = match &self.kind {
            NoiseKind::BandLimitedWhite { f_lo, f_hi } => {
                let taps = design_bandpass(*f_lo, *f_hi, self.sample_rate, BANDPASS_ORDER);
                // Draw extra samples so the kept block starts in steady state.
                let white = gaussian(self.seed, n_samples + taps.len() - 1);
                (0..n_samples)
                    .map(|n| {
                        let end = n + taps.len() - 1;
                        taps.iter()
                            .enumerate()
                            .map(|(i, h)| h * white[end - i])
                            .sum()
                    })
                    .collect()
            }
            NoiseKind::White => gaussian(self.seed, n_samples),
            NoiseKind::FilePlayback { samples } => {
                samples.iter().copied().cycle().take(n_samples).collect()
            }
        };
        Ok(normalize_unit_variance(raw))
    }
}

/// Band-limited white noise per [`NoiseSource::generate`].
pub fn gen_bandlimited_noise(src: &NoiseSource, n_samples: usize) -> Result<Vec<f64>> {
    match src.kind {
        NoiseKind::BandLimitedWhite { .. } => src.generate(n_samples),
        _ => Err(AncError::config("gen_bandlimited_noise needs a band-limited source")),
    }
}

fn gaussian(seed: u64, n: usize) -> Vec<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n).map(|_| StandardNormal.sample(&mut rng)).collect()
}

fn normalize_unit_variance(mut x: Vec<f64>) -> Vec<f64> {
    let n = x.len() as f64;
    let mean = x.iter().sum::<f64>() / n;
    let var = x.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n;
    if var > 0.0 {
        let scale = var.sqrt().recip();
        x.iter_mut().for_each(|v| *v *= scale);
    }
    x
}

/// Linear-phase band-pass FIR: difference of two windowed sincs with a
/// Hamming window, `order + 1` taps.
pub fn design_bandpass(f_lo: f64, f_hi: f64, sample_rate: f64, order: usize) -> Vec<f64> {
    let lo = f_lo / sample_rate;
    let hi = f_hi / sample_rate;
    let mid = order as f64 / 2.0;
    (0..=order)
        .map(|n| {
            let t = n as f64 - mid;
            let ideal = 2.0 * hi * sinc(2.0 * hi * t) - 2.0 * lo * sinc(2.0 * lo * t);
            let window = 0.54 - 0.46 * (2.0 * PI * n as f64 / order as f64).cos();
            ideal * window
        })
        .collect()
}

fn sinc(x: f64) -> f64 {
    if x == 0.0 {
        1.0
    } else {
        (PI * x).sin() / (PI * x)
    }
}
