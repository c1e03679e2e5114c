//! Compensation filters relating cross paths to self paths, and the mixed
//! cumulative-gradient combination that turns neighbours' accumulated
//! updates into a node's new control filter.

use nalgebra::{DMatrix, DVector};

use crate::dsp::{convolve, convolve_truncated, FirFilter};
use crate::error::{AncError, Result};
use crate::plant::PathMatrix;

/// Difference between a node's current control filter and its filter at the
/// last communication, i.e. the sum of its LMS updates since then.
#[derive(Debug, Clone, PartialEq)]
pub struct CumulativeGradient {
    pub node_id: usize,
    pub phi: Vec<f64>,
    /// Combination round this gradient belongs to.
    pub epoch: u64,
}

/// K x K compensation filters `c_km` with `s_km ≈ s_kk * c_km`.
#[derive(Debug, Clone, PartialEq)]
pub struct CompensationSet {
    k: usize,
    filters: Vec<FirFilter>,
    residual_fit: Vec<f64>,
}

impl CompensationSet {
    /// Wraps explicit filters (row-major). Diagonal entries are replaced by
    /// unit impulses; fit residuals are reported as zero.
    pub fn from_filters(k: usize, mut filters: Vec<FirFilter>) -> Result<Self> {
        if k == 0 || filters.len() != k * k {
            return Err(AncError::config(format!(
                "compensation set for K={k} needs {} filters, got {}",
                k * k,
                filters.len()
            )));
        }
        let len = filters[0].len();
        if filters.iter().any(|f| f.len() != len) {
            return Err(AncError::config("compensation filters must share one length"));
        }
        for i in 0..k {
            filters[i * k + i] = FirFilter::impulse(len, 0);
        }
        Ok(Self {
            k,
            filters,
            residual_fit: vec![0.0; k * k],
        })
    }

    pub fn num_nodes(&self) -> usize {
        self.k
    }

    pub fn taps(&self) -> usize {
        self.filters[0].len()
    }

    pub fn filter(&self, k: usize, m: usize) -> &FirFilter {
        &self.filters[k * self.k + m]
    }

    /// `||s_km - s_kk * c_km|| / ||s_km||`, zero on the diagonal and for
    /// silent cross paths.
    pub fn residual_fit(&self, k: usize, m: usize) -> f64 {
        self.residual_fit[k * self.k + m]
    }

    pub fn max_residual_fit(&self) -> f64 {
        self.residual_fit.iter().copied().fold(0.0, f64::max)
    }
}

/// Fits every off-diagonal `c_km` of length `taps` by ridge-regularized least
/// squares on the convolution system `s_kk * c ≈ s_km`.
pub fn fit_compensation(paths: &PathMatrix, taps: usize, ridge: f64) -> Result<CompensationSet> {
    if taps == 0 {
        return Err(AncError::config("compensation filters need at least one tap"));
    }
    if !(ridge >= 0.0) || !ridge.is_finite() {
        return Err(AncError::config(format!("ridge {ridge} must be finite and ≥ 0")));
    }
    let k = paths.num_nodes();
    let mut filters = Vec::with_capacity(k * k);
    let mut residual_fit = Vec::with_capacity(k * k);
    for row in 0..k {
        let s_self = paths.secondary(row, row).coeffs();
        let normal = autocorrelation_matrix(s_self, taps, ridge);
        let chol = normal.clone().cholesky();
        let singular = match &chol {
            None => true,
            Some(c) => {
                let diag = c.l_dirty().diagonal();
                let (lo, hi) = diag
                    .iter()
                    .fold((f64::INFINITY, 0.0f64), |(lo, hi), d| (lo.min(d * d), hi.max(d * d)));
                lo <= hi * 1e-14
            }
        };
        if singular && ridge == 0.0 {
            return Err(AncError::Numerical(format!(
                "normal equations for self path s_{row}{row} are singular; use a positive ridge"
            )));
        }
        let chol = match chol {
            Some(c) => c,
            None => {
                return Err(AncError::Numerical(format!(
                    "normal equations for self path s_{row}{row} are not positive definite"
                )))
            }
        };
        for col in 0..k {
            if row == col {
                filters.push(FirFilter::impulse(taps, 0));
                residual_fit.push(0.0);
                continue;
            }
            let cross = paths.secondary(row, col).coeffs();
            let rhs = cross_correlation(s_self, cross, taps);
            let c = chol.solve(&rhs);
            let coeffs: Vec<f64> = c.iter().copied().collect();
            let fit = relative_residual(s_self, cross, &coeffs);
            let filter = FirFilter::new(coeffs)
                .map_err(|e| AncError::Numerical(format!("compensation c_{row}{col}: {e}")))?;
            filters.push(filter);
            residual_fit.push(fit);
        }
    }
    Ok(CompensationSet {
        k,
        filters,
        residual_fit,
    })
}

/// `T^T T + ridge I` where `T` is the full convolution matrix of `s`.
fn autocorrelation_matrix(s: &[f64], taps: usize, ridge: f64) -> DMatrix<f64> {
    let lag = |l: usize| -> f64 {
        if l >= s.len() {
            0.0
        } else {
            s.iter().zip(&s[l..]).map(|(a, b)| a * b).sum()
        }
    };
    let r: Vec<f64> = (0..taps).map(lag).collect();
    DMatrix::from_fn(taps, taps, |i, j| {
        let v = r[i.abs_diff(j)];
        if i == j {
            v + ridge
        } else {
            v
        }
    })
}

/// `T^T target` for the full convolution matrix `T` of `s`.
fn cross_correlation(s: &[f64], target: &[f64], taps: usize) -> DVector<f64> {
    DVector::from_fn(taps, |i, _| {
        s.iter()
            .enumerate()
            .filter_map(|(n, sv)| target.get(n + i).map(|t| sv * t))
            .sum()
    })
}

fn relative_residual(s_self: &[f64], cross: &[f64], c: &[f64]) -> f64 {
    let target_norm = cross.iter().map(|v| v * v).sum::<f64>().sqrt();
    let model = convolve(s_self, c);
    let len = model.len().max(cross.len());
    let err: f64 = (0..len)
        .map(|i| {
            let d = cross.get(i).copied().unwrap_or(0.0) - model.get(i).copied().unwrap_or(0.0);
            d * d
        })
        .sum::<f64>()
        .sqrt();
    if target_norm == 0.0 {
        err
    } else {
        err / target_norm
    }
}

/// Mixed cumulative-gradient combination for node `k`:
/// `w' + phi_k + sum_{m != k} (phi_m * c_km)`, each convolution truncated to
/// the control-filter length.
pub fn mcgd_combine(
    k: usize,
    w_snapshot: &FirFilter,
    grads: &[CumulativeGradient],
    comp: &CompensationSet,
) -> Result<FirFilter> {
    let nodes = comp.num_nodes();
    let taps = w_snapshot.len();
    if k >= nodes {
        return Err(AncError::protocol(format!("node {k} outside a {nodes}-node network")));
    }
    let mut by_node: Vec<Option<&CumulativeGradient>> = vec![None; nodes];
    for g in grads {
        let slot = by_node.get_mut(g.node_id).ok_or_else(|| {
            AncError::protocol(format!("gradient from unknown node {}", g.node_id))
        })?;
        if slot.replace(g).is_some() {
            return Err(AncError::protocol(format!(
                "two gradients from node {}",
                g.node_id
            )));
        }
        if g.phi.len() != taps {
            return Err(AncError::protocol(format!(
                "gradient from node {} has {} taps, expected {taps}",
                g.node_id,
                g.phi.len()
            )));
        }
    }
    if let Some(missing) = by_node.iter().position(Option::is_none) {
        return Err(AncError::protocol(format!("missing gradient from node {missing}")));
    }
    let epoch = by_node[0].map(|g| g.epoch).unwrap_or_default();
    if let Some(g) = by_node.iter().flatten().find(|g| g.epoch != epoch) {
        return Err(AncError::protocol(format!(
            "epoch mismatch: node {} sent epoch {}, expected {epoch}",
            g.node_id, g.epoch
        )));
    }

    let mut w: Vec<f64> = w_snapshot.coeffs().to_vec();
    for (wi, p) in w.iter_mut().zip(&by_node[k].expect("checked").phi) {
        *wi += p;
    }
    for (m, g) in by_node.iter().enumerate() {
        if m == k {
            continue;
        }
        let c = comp.filter(k, m);
        if c.is_zero() {
            continue;
        }
        let cross = convolve_truncated(&g.expect("checked").phi, c.coeffs(), taps);
        for (wi, v) in w.iter_mut().zip(cross) {
            *wi += v;
        }
    }
    FirFilter::new(w).map_err(|e| AncError::Numerical(format!("combined filter for node {k}: {e}")))
}
