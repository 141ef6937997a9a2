//! Maximum likelihood parameter generation and cepstral post-filtering.
//!
//! For each static dimension independently, MLPG solves
//! `(Wᵀ U⁻¹ W) c = Wᵀ U⁻¹ μ`, where `W` stacks the static and dynamic window
//! matrices (with the same edge replication as
//! [`compute_deltas`](crate::features::compute_deltas)) and `U` holds the
//! per-window variances. The normal matrix is banded with half-bandwidth
//! `2 · max_offset`, so a banded Cholesky factorization solves each
//! dimension in O(T).

use ndarray::{Array1, Array2, ArrayView1};

use crate::error::{Error, Result};
use crate::features::{DeltaWindow, DeltaWindowSet, FeatureKind, FeatureSequence, LOWER_DIMS};

/// Predicted static+dynamic means with global per-column variances.
#[derive(Debug, Clone, PartialEq)]
pub struct GaussianTrajectory {
    means: Array2<f64>,
    variances: Array1<f64>,
    windows: DeltaWindowSet,
}

impl GaussianTrajectory {
    /// `means` columns are window-major (`[static | Δ | ΔΔ]`). A variance of
    /// `+∞` removes that column from the objective.
    pub fn new(means: Array2<f64>, variances: Array1<f64>, windows: DeltaWindowSet) -> Result<Self> {
        let width = means.ncols();
        if windows.is_empty() || !width.is_multiple_of(windows.len()) || width == 0 {
            return Err(Error::InvalidArgument(format!(
                "mean width {width} is not a multiple of {} windows",
                windows.len()
            )));
        }
        if variances.len() != width {
            return Err(Error::DimensionMismatch {
                expected: width,
                actual: variances.len(),
                context: "trajectory variances",
            });
        }
        if means.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("trajectory means".into()));
        }
        if variances.iter().any(|v| v.is_nan() || *v <= 0.0) {
            return Err(Error::InvalidArgument("trajectory variances must be > 0".into()));
        }
        Ok(Self {
            means,
            variances,
            windows,
        })
    }

    pub fn frames(&self) -> usize {
        self.means.nrows()
    }

    pub fn static_dims(&self) -> usize {
        self.means.ncols() / self.windows.len()
    }

    pub fn means(&self) -> &Array2<f64> {
        &self.means
    }

    pub fn variances(&self) -> &Array1<f64> {
        &self.variances
    }

    pub fn windows(&self) -> &DeltaWindowSet {
        &self.windows
    }
}

/// Nonzero entries of row `t` of a window matrix, duplicates merged.
fn window_row(window: &DeltaWindow, t: usize, frames: usize) -> Vec<(usize, f64)> {
    let mut row: Vec<(usize, f64)> = Vec::with_capacity(window.taps().len());
    for &(offset, coef) in window.taps() {
        let col = DeltaWindow::clamp_index(t, offset, frames);
        match row.iter_mut().find(|(c, _)| *c == col) {
            Some(entry) => entry.1 += coef,
            None => row.push((col, coef)),
        }
    }
    row
}

/// Symmetric positive-definite band matrix stored as its lower band:
/// `band[[i, k]] = A[i][i - k]` for `k ≤ half_bandwidth`.
#[derive(Debug, Clone)]
pub(crate) struct SymmetricBand {
    band: Array2<f64>,
    half_bandwidth: usize,
}

impl SymmetricBand {
    pub(crate) fn zeros(n: usize, half_bandwidth: usize) -> Self {
        Self {
            band: Array2::zeros((n, half_bandwidth + 1)),
            half_bandwidth,
        }
    }

    pub(crate) fn n(&self) -> usize {
        self.band.nrows()
    }

    /// Adds `v` to `A[i][j]` (and implicitly `A[j][i]`).
    pub(crate) fn add(&mut self, i: usize, j: usize, v: f64) {
        let (hi, lo) = if i >= j { (i, j) } else { (j, i) };
        debug_assert!(hi - lo <= self.half_bandwidth);
        self.band[[hi, hi - lo]] += v;
    }

    /// Solves `A x = b` by banded Cholesky, `A = L Lᵀ`.
    pub(crate) fn solve(&self, rhs: ArrayView1<'_, f64>) -> Result<Array1<f64>> {
        let n = self.n();
        let w = self.half_bandwidth;
        let mut l = Array2::<f64>::zeros((n, w + 1));
        for i in 0..n {
            let start = i.saturating_sub(w);
            for k in start..=i {
                let mut sum = self.band[[i, i - k]];
                for j in start.max(k.saturating_sub(w))..k {
                    sum -= l[[i, i - j]] * l[[k, k - j]];
                }
                if k == i {
                    if sum.is_nan() || sum <= 0.0 {
                        return Err(Error::InvalidArgument(format!(
                            "MLPG system is not positive definite at frame {i}"
                        )));
                    }
                    l[[i, 0]] = sum.sqrt();
                } else {
                    l[[i, i - k]] = sum / l[[k, 0]];
                }
            }
        }
        let mut z = Array1::<f64>::zeros(n);
        for i in 0..n {
            let mut sum = rhs[i];
            for j in i.saturating_sub(w)..i {
                sum -= l[[i, i - j]] * z[j];
            }
            z[i] = sum / l[[i, 0]];
        }
        let mut x = Array1::<f64>::zeros(n);
        for i in (0..n).rev() {
            let mut sum = z[i];
            for j in i + 1..(i + w + 1).min(n) {
                sum -= l[[j, j - i]] * x[j];
            }
            x[i] = sum / l[[i, 0]];
        }
        Ok(x)
    }
}

/// Builds the per-dimension normal equations `(P, r)`.
pub(crate) fn normal_equations(traj: &GaussianTrajectory, dim: usize) -> (SymmetricBand, Array1<f64>) {
    let frames = traj.frames();
    let statics = traj.static_dims();
    let mut p = SymmetricBand::zeros(frames, 2 * traj.windows.max_offset());
    let mut r = Array1::zeros(frames);
    for (w, window) in traj.windows.windows().iter().enumerate() {
        let col = w * statics + dim;
        let precision = 1.0 / traj.variances[col];
        if precision == 0.0 {
            continue;
        }
        for t in 0..frames {
            let row = window_row(window, t, frames);
            let mu = traj.means[[t, col]];
            for &(a, ca) in &row {
                r[a] += precision * ca * mu;
                for &(b, cb) in &row {
                    if b <= a {
                        p.add(a, b, precision * ca * cb);
                    }
                }
            }
        }
    }
    (p, r)
}

/// Maximum likelihood static trajectory.
pub fn mlpg_generate(traj: &GaussianTrajectory) -> Result<FeatureSequence> {
    let frames = traj.frames();
    if frames == 0 {
        return Err(Error::Empty("MLPG needs at least one frame"));
    }
    let statics = traj.static_dims();
    let mut out = Array2::zeros((frames, statics));
    for d in 0..statics {
        let (p, r) = normal_equations(traj, d);
        out.column_mut(d).assign(&p.solve(r.view())?);
    }
    let kind = if statics == LOWER_DIMS {
        FeatureKind::McepLow25
    } else {
        FeatureKind::Generic
    };
    FeatureSequence::new(kind, out)
}

/// Simplified cepstral emphasis: coefficients from index 2 upward are scaled
/// by `1 + beta`; coefficients 0 and 1 are left alone.
pub fn postfilter(seq: &FeatureSequence, beta: f64) -> Result<FeatureSequence> {
    if !(beta >= 0.0 && beta.is_finite()) {
        return Err(Error::InvalidArgument(format!(
            "post-filter beta must be >= 0, got {beta}"
        )));
    }
    let mut data = seq.data().to_owned();
    if beta != 0.0 {
        data.columns_mut().into_iter().skip(2).for_each(|mut c| c *= 1.0 + beta);
    }
    FeatureSequence::new(seq.kind(), data)
}
