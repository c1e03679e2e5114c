//! FIR filters, delay lines and the direct-form convolution kernels every
//! other module is built on.

use crate::error::{AncError, Result};

/// Finite impulse response filter with a fixed number of taps.
///
/// Coefficients may be rewritten in place (adaptive control filters do this
/// every sample) but the tap count never changes.
#[derive(Debug, Clone, PartialEq)]
pub struct FirFilter {
    coeffs: Vec<f64>,
}

impl FirFilter {
    /// Builds a filter, rejecting empty or non-finite coefficient vectors.
    pub fn new(coeffs: Vec<f64>) -> Result<Self> {
        if coeffs.is_empty() {
            return Err(AncError::config("FIR filter needs at least one tap"));
        }
        if let Some(i) = coeffs.iter().position(|c| !c.is_finite()) {
            return Err(AncError::config(format!(
                "FIR filter tap {i} is not finite ({})",
                coeffs[i]
            )));
        }
        Ok(Self { coeffs })
    }

    pub fn zeros(len: usize) -> Self {
        assert!(len >= 1, "FIR filter needs at least one tap");
        Self { coeffs: vec![0.0; len] }
    }

    /// Unit impulse at tap `delay` in a filter of `len` taps.
    pub fn impulse(len: usize, delay: usize) -> Self {
        assert!(delay < len, "impulse delay {delay} outside {len} taps");
        let mut f = Self::zeros(len);
        f.coeffs[delay] = 1.0;
        f
    }

    pub fn len(&self) -> usize {
        self.coeffs.len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn coeffs(&self) -> &[f64] {
        &self.coeffs
    }

    pub fn coeffs_mut(&mut self) -> &mut [f64] {
        &mut self.coeffs
    }

    pub fn into_coeffs(self) -> Vec<f64> {
        self.coeffs
    }

    /// Euclidean norm of the coefficient vector.
    pub fn norm(&self) -> f64 {
        self.coeffs.iter().map(|c| c * c).sum::<f64>().sqrt()
    }

    pub fn is_zero(&self) -> bool {
        self.coeffs.iter().all(|&c| c == 0.0)
    }

    /// Copy of the first `len` taps, zero padded when the filter is shorter.
    pub fn truncated(&self, len: usize) -> FirFilter {
        let mut out = vec![0.0; len.max(1)];
        let n = len.min(self.coeffs.len());
        out[..n].copy_from_slice(&self.coeffs[..n]);
        FirFilter { coeffs: out }
    }

    /// Runs the filter over a whole signal with zero initial state, returning
    /// as many samples as the input.
    pub fn filter_signal(&self, input: &[f64]) -> Vec<f64> {
        let taps = &self.coeffs;
        (0..input.len())
            .map(|n| {
                let reach = taps.len().min(n + 1);
                (0..reach).map(|i| taps[i] * input[n - i]).sum()
            })
            .collect()
    }
}

/// Fixed-length history of the most recent samples, newest first.
///
/// Samples are stored twice in a buffer of length `2M` so that the history
/// is always available as one contiguous slice without wrapping.
#[derive(Debug, Clone)]
pub struct DelayLine {
    buf: Vec<f64>,
    len: usize,
    pos: usize,
}

impl DelayLine {
    pub fn new(len: usize) -> Self {
        assert!(len >= 1, "delay line needs at least one slot");
        Self {
            buf: vec![0.0; 2 * len],
            len,
            pos: 0,
        }
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn push(&mut self, x: f64) {
        self.pos = if self.pos == 0 { self.len - 1 } else { self.pos - 1 };
        self.buf[self.pos] = x;
        self.buf[self.pos + self.len] = x;
    }

    /// Sample pushed `i` steps ago (0 is the newest).
    pub fn get(&self, i: usize) -> f64 {
        assert!(i < self.len, "delay index {i} outside {} slots", self.len);
        self.buf[self.pos + i]
    }

    /// The whole history, newest first.
    pub fn as_slice(&self) -> &[f64] {
        &self.buf[self.pos..self.pos + self.len]
    }

    pub fn clear(&mut self) {
        self.buf.iter_mut().for_each(|v| *v = 0.0);
        self.pos = 0;
    }
}

/// Inner product of two equal-length slices.
#[inline]
pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    debug_assert_eq!(a.len(), b.len());
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// `y += scale * x`, element-wise.
#[inline]
pub fn axpy(y: &mut [f64], scale: f64, x: &[f64]) {
    debug_assert_eq!(y.len(), x.len());
    for (yi, xi) in y.iter_mut().zip(x) {
        *yi += scale * xi;
    }
}

/// One output sample of `filter` applied to `history` (newest first):
/// `sum_i coeffs[i] * history[i]`.
///
/// The history must be at least as long as the filter; the components that
/// own both check this when they are built.
#[inline]
pub fn fir_convolve_step(filter: &FirFilter, history: &DelayLine) -> f64 {
    let taps = filter.coeffs();
    dot(taps, &history.as_slice()[..taps.len()])
}

/// Full linear convolution of two coefficient slices, length `a + b - 1`.
pub fn convolve(a: &[f64], b: &[f64]) -> Vec<f64> {
    if a.is_empty() || b.is_empty() {
        return Vec::new();
    }
    let mut out = vec![0.0; a.len() + b.len() - 1];
    for (i, &ai) in a.iter().enumerate() {
        if ai == 0.0 {
            continue;
        }
        for (o, &bj) in out[i..].iter_mut().zip(b) {
            *o += ai * bj;
        }
    }
    out
}

/// Full linear convolution of two filters.
pub fn fir_convolve_full(a: &FirFilter, b: &FirFilter) -> FirFilter {
    FirFilter {
        coeffs: convolve(a.coeffs(), b.coeffs()),
    }
}

/// First `len` taps of `a * b`; the overflow taps are never computed.
pub fn convolve_truncated(a: &[f64], b: &[f64], len: usize) -> Vec<f64> {
    let mut out = vec![0.0; len];
    for (i, &ai) in a.iter().enumerate().take(len) {
        if ai == 0.0 {
            continue;
        }
        for (o, &bj) in out[i..].iter_mut().zip(b) {
            *o += ai * bj;
        }
    }
    out
}
