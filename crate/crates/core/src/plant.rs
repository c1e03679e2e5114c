//! Acoustic plant: primary paths from the shared reference to every error
//! microphone, and the K x K grid of secondary paths from every loudspeaker
//! to every microphone.

use std::fmt::Write as _;
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::dsp::{dot, DelayLine, FirFilter};
use crate::error::{AncError, Result};

/// Primary paths `p_k` and secondary paths `s_km` (microphone `k`, source `m`).
#[derive(Debug, Clone, PartialEq)]
pub struct PathMatrix {
    k: usize,
    primary: Vec<FirFilter>,
    /// Row-major: index `k * K + m`.
    secondary: Vec<FirFilter>,
}

impl PathMatrix {
    pub fn new(primary: Vec<FirFilter>, secondary: Vec<FirFilter>) -> Result<Self> {
        let k = primary.len();
        let mut errors = Vec::new();
        if k == 0 {
            errors.push("path matrix needs at least one node".to_string());
        }
        if secondary.len() != k * k {
            errors.push(format!(
                "{k} primary paths need a {k}x{k} secondary grid ({} paths), got {}",
                k * k,
                secondary.len()
            ));
        }
        if !errors.is_empty() {
            return Err(AncError::Config(errors));
        }
        let l_p = primary[0].len();
        if primary.iter().any(|p| p.len() != l_p) {
            errors.push("primary paths must share one tap length".to_string());
        }
        let l_s = secondary[0].len();
        if secondary.iter().any(|s| s.len() != l_s) {
            errors.push("secondary paths must share one tap length".to_string());
        }
        for i in 0..k {
            if secondary[i * k + i].norm() == 0.0 {
                errors.push(format!("self path s_{i}{i} has zero energy"));
            }
        }
        if errors.is_empty() {
            Ok(Self {
                k,
                primary,
                secondary,
            })
        } else {
            Err(AncError::Config(errors))
        }
    }

    pub fn num_nodes(&self) -> usize {
        self.k
    }

    pub fn primary_len(&self) -> usize {
        self.primary[0].len()
    }

    pub fn secondary_len(&self) -> usize {
        self.secondary[0].len()
    }

    pub fn primary(&self, k: usize) -> &FirFilter {
        &self.primary[k]
    }

    /// Path from source `m` into error microphone `k`.
    pub fn secondary(&self, k: usize, m: usize) -> &FirFilter {
        &self.secondary[k * self.k + m]
    }

    pub fn primaries(&self) -> &[FirFilter] {
        &self.primary
    }

    pub fn secondaries(&self) -> &[FirFilter] {
        &self.secondary
    }

    /// Serializes to the plain-text path-bundle format: a `K L_p L_s` header,
    /// K primary rows, then K*K secondary rows in (k, m) row-major order.
    /// Every value is written with 17 significant digits.
    pub fn to_bundle_string(&self) -> String {
        let mut out = format!(
            "{} {} {}\n",
            self.k,
            self.primary_len(),
            self.secondary_len()
        );
        for f in self.primary.iter().chain(&self.secondary) {
            let mut first = true;
            for c in f.coeffs() {
                if !first {
                    out.push(' ');
                }
                first = false;
                let _ = write!(out, "{c:.16e}");
            }
            out.push('\n');
        }
        out
    }

    pub fn parse_bundle(text: &str) -> std::result::Result<Self, String> {
        let mut lines = text.lines().filter(|l| !l.trim().is_empty());
        let header = lines.next().ok_or("empty file")?;
        let dims: Vec<usize> = header
            .split_whitespace()
            .map(|t| t.parse::<usize>())
            .collect::<std::result::Result<_, _>>()
            .map_err(|e| format!("bad header {header:?}: {e}"))?;
        let [k, l_p, l_s] = dims[..] else {
            return Err(format!("header must be `K L_p L_s`, got {header:?}"));
        };
        let rows: Vec<&str> = lines.collect();
        if rows.len() != k + k * k {
            return Err(format!(
                "dimension mismatch: header K={k} needs {k} primary + {} secondary rows, found {} rows",
                k * k,
                rows.len()
            ));
        }
        let mut filters = Vec::with_capacity(rows.len());
        for (r, row) in rows.iter().enumerate() {
            let expected = if r < k { l_p } else { l_s };
            let taps: Vec<f64> = row
                .split_whitespace()
                .enumerate()
                .map(|(i, t)| {
                    t.parse::<f64>()
                        .map_err(|e| format!("row {r} tap {i}: {e}"))
                })
                .collect::<std::result::Result<_, _>>()?;
            if taps.len() != expected {
                return Err(format!(
                    "dimension mismatch: row {r} has {} taps, expected {expected}",
                    taps.len()
                ));
            }
            if let Some(i) = taps.iter().position(|t| !t.is_finite()) {
                return Err(format!("row {r} tap {i} is not finite ({})", taps[i]));
            }
            filters.push(FirFilter::new(taps).map_err(|e| e.to_string())?);
        }
        let secondary = filters.split_off(k);
        PathMatrix::new(filters, secondary).map_err(|e| e.to_string())
    }
}

/// Writes a path bundle file.
pub fn save_paths(paths: &PathMatrix, file: impl AsRef<Path>) -> Result<()> {
    std::fs::write(file, paths.to_bundle_string())?;
    Ok(())
}

/// Reads a path bundle file.
pub fn load_paths(file: impl AsRef<Path>) -> Result<PathMatrix> {
    let file = file.as_ref();
    let text = std::fs::read_to_string(file).map_err(|e| AncError::PathBundle {
        path: file.to_path_buf(),
        reason: e.to_string(),
    })?;
    PathMatrix::parse_bundle(&text).map_err(|reason| AncError::PathBundle {
        path: file.to_path_buf(),
        reason,
    })
}

/// Seeded synthetic acoustic paths.
///
/// Every path is Gaussian noise under an exponential envelope with time
/// constant `L/4`, preceded by a propagation delay. Self paths have unit
/// norm; cross paths have norm `cross_gain` and a delay at least that of the
/// self path on the same microphone.
pub fn synth_paths(k: usize, l_p: usize, l_s: usize, seed: u64, cross_gain: f64) -> Result<PathMatrix> {
    let mut errors = Vec::new();
    if k == 0 {
        errors.push("K must be at least 1".to_string());
    }
    if l_p < 8 || l_s < 8 {
        errors.push(format!("path lengths must be at least 8 (L_p={l_p}, L_s={l_s})"));
    }
    if !(0.0..=1.0).contains(&cross_gain) {
        errors.push(format!("cross_gain {cross_gain} outside [0, 1]"));
    }
    if !errors.is_empty() {
        return Err(AncError::Config(errors));
    }

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let primary_delay = l_p / 8;
    let primary = (0..k)
        .map(|_| {
            let delay = primary_delay + rng.gen_range(0..=l_p / 16);
            decaying_path(&mut rng, l_p, delay, 1.0)
        })
        .collect();

    let self_delay = (l_s / 16).max(1);
    let mut secondary = Vec::with_capacity(k * k);
    for row in 0..k {
        for col in 0..k {
            let path = if row == col {
                decaying_path(&mut rng, l_s, self_delay, 1.0)
            } else {
                let delay = self_delay + rng.gen_range(0..=l_s / 16);
                decaying_path(&mut rng, l_s, delay, cross_gain)
            };
            secondary.push(path);
        }
    }
    PathMatrix::new(primary, secondary)
}

fn decaying_path(rng: &mut ChaCha8Rng, len: usize, delay: usize, norm: f64) -> FirFilter {
    let tau = len as f64 / 4.0;
    let mut taps = vec![0.0; len];
    for (i, t) in taps.iter_mut().enumerate().skip(delay) {
        let g: f64 = StandardNormal.sample(rng);
        *t = g * (-((i - delay) as f64) / tau).exp();
    }
    let energy = taps.iter().map(|t| t * t).sum::<f64>().sqrt();
    if norm == 0.0 || energy == 0.0 {
        return FirFilter::zeros(len);
    }
    let scale = norm / energy;
    taps.iter_mut().for_each(|t| *t *= scale);
    FirFilter::new(taps).expect("finite synthetic taps")
}

/// Delay-line state of the plant for one simulation run.
#[derive(Debug, Clone)]
pub struct PlantState {
    reference: DelayLine,
    outputs: Vec<DelayLine>,
    disturbance: Vec<f64>,
    tick: u64,
}

impl PlantState {
    pub fn new(paths: &PathMatrix) -> Self {
        let k = paths.num_nodes();
        Self {
            reference: DelayLine::new(paths.primary_len()),
            outputs: (0..k).map(|_| DelayLine::new(paths.secondary_len())).collect(),
            disturbance: vec![0.0; k],
            tick: 0,
        }
    }

    /// Advances one sample. Pushes `x_n` and the control outputs `y`, then
    /// writes `e_k = d_k - sum_m (s_km * y_m)` into `e`.
    pub fn step(&mut self, paths: &PathMatrix, x_n: f64, y: &[f64], e: &mut [f64]) {
        let k = paths.num_nodes();
        assert_eq!(y.len(), k, "plant needs one control sample per node");
        assert_eq!(e.len(), k, "plant writes one error sample per node");
        self.reference.push(x_n);
        for (line, &ym) in self.outputs.iter_mut().zip(y) {
            line.push(ym);
        }
        let xs = self.reference.as_slice();
        for row in 0..k {
            let d = dot(paths.primary(row).coeffs(), xs);
            let anti: f64 = (0..k)
                .map(|col| dot(paths.secondary(row, col).coeffs(), self.outputs[col].as_slice()))
                .sum();
            self.disturbance[row] = d;
            e[row] = d - anti;
        }
        self.tick += 1;
    }

    /// Disturbances `d_k(n)` of the most recent step.
    pub fn disturbance(&self) -> &[f64] {
        &self.disturbance
    }

    pub fn tick(&self) -> u64 {
        self.tick
    }
}

/// Convenience wrapper returning the error vector.
pub fn plant_step(state: &mut PlantState, paths: &PathMatrix, x_n: f64, y: &[f64]) -> Vec<f64> {
    let mut e = vec![0.0; paths.num_nodes()];
    state.step(paths, x_n, y, &mut e);
    e
}
