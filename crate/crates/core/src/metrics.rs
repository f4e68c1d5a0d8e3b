//! Sample-based quality metrics.

use ndarray::{Array1, Array2, ArrayView2};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::density::DensityModel;
use crate::error::{Error, Result};
use crate::training::LOG_FLOOR;

pub const DEFAULT_PROJECTIONS: usize = 64;

/// Points in the common grid on which the 1D densities are compared.
pub const GRID_POINTS: usize = 2048;

/// Kernel support in bandwidths; the Gaussian tail beyond it is below 1e-6.
const KERNEL_CUTOFF: f64 = 5.0;

/// `n` directions drawn uniformly from the unit sphere in `d` dimensions.
pub fn random_directions(d: usize, n: usize, seed: u64) -> Array2<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = Array2::zeros((n, d));
    for mut row in out.rows_mut() {
        loop {
            row.iter_mut().for_each(|v: &mut f64| *v = rng.sample(StandardNormal));
            let norm = row.dot(&row).sqrt();
            if norm > 1e-12 {
                row /= norm;
                break;
            }
        }
    }
    out
}

/// Silverman's rule `0.9 · min(σ, IQR / 1.34) · n^{-1/5}`, falling back to
/// whichever spread is positive, then to a tiny width for constant data.
pub fn silverman_bandwidth(values: &[f64]) -> f64 {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (n - 1.0).max(1.0);
    let sd = var.sqrt();
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    let quantile = |q: f64| {
        let pos = q * (sorted.len() - 1) as f64;
        let lo = pos.floor() as usize;
        let hi = pos.ceil() as usize;
        sorted[lo] + (pos - lo as f64) * (sorted[hi] - sorted[lo])
    };
    let iqr = (quantile(0.75) - quantile(0.25)) / 1.34;
    let spread = match (sd > 0.0, iqr > 0.0) {
        (true, true) => sd.min(iqr),
        (true, false) => sd,
        (false, true) => iqr,
        (false, false) => 1e-3 * mean.abs().max(1.0),
    };
    0.9 * spread * n.powf(-0.2)
}

/// Gaussian KDE of `values` on a uniform grid starting at `lo` with spacing
/// `step`: linear binning followed by a discrete convolution with the kernel.
fn binned_kde(values: &[f64], h: f64, lo: f64, step: f64, len: usize) -> Vec<f64> {
    let mut bins = vec![0.0; len];
    let w = 1.0 / values.len() as f64;
    for &v in values {
        let pos = ((v - lo) / step).clamp(0.0, (len - 1) as f64);
        let j = (pos.floor() as usize).min(len - 2);
        let frac = pos - j as f64;
        bins[j] += w * (1.0 - frac);
        bins[j + 1] += w * frac;
    }
    let reach = ((KERNEL_CUTOFF * h / step).ceil() as usize).min(len - 1);
    let norm = 1.0 / (h * (2.0 * std::f64::consts::PI).sqrt());
    let kernel: Vec<f64> = (0..=reach)
        .map(|o| {
            let t = o as f64 * step / h;
            norm * (-0.5 * t * t).exp()
        })
        .collect();
    let mut out = vec![0.0; len];
    for (j, &b) in bins.iter().enumerate() {
        if b == 0.0 {
            continue;
        }
        let start = j.saturating_sub(reach);
        let end = (j + reach).min(len - 1);
        for (i, o) in out[start..=end].iter_mut().enumerate() {
            *o += b * kernel[(start + i).abs_diff(j)];
        }
    }
    out
}

/// Total variation `∫ |p̂_1 − p̂_2|` between KDEs of two 1D samples.
pub fn tv_1d(y1: &[f64], y2: &[f64]) -> f64 {
    let h1 = silverman_bandwidth(y1);
    let h2 = silverman_bandwidth(y2);
    let pad = 3.0 * h1.max(h2);
    let (mn, mx) = y1
        .iter()
        .chain(y2)
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), &v| (a.min(v), b.max(v)));
    let lo = mn - pad;
    let hi = mx + pad;
    let step = (hi - lo) / (GRID_POINTS - 1) as f64;
    let p1 = binned_kde(y1, h1, lo, step, GRID_POINTS);
    let p2 = binned_kde(y2, h2, lo, step, GRID_POINTS);
    let diff: Vec<f64> = p1.iter().zip(&p2).map(|(a, b)| (a - b).abs()).collect();
    let inner: f64 = diff[1..GRID_POINTS - 1].iter().sum();
    (step * (inner + 0.5 * (diff[0] + diff[GRID_POINTS - 1]))).min(2.0)
}

/// Mean 1D total variation over `n_projections` random directions.
pub fn sliced_tv(x1: ArrayView2<f64>, x2: ArrayView2<f64>, n_projections: usize, seed: u64) -> Result<f64> {
    if x1.nrows() == 0 || x2.nrows() == 0 {
        return Err(Error::Data("sliced TV needs two nonempty sample sets".into()));
    }
    if x1.ncols() != x2.ncols() {
        return Err(Error::Shape(format!("sample sets have {} and {} columns", x1.ncols(), x2.ncols())));
    }
    if n_projections == 0 {
        return Err(Error::InvalidArgument("need at least one projection".into()));
    }
    let dirs = random_directions(x1.ncols(), n_projections, seed);
    let tvs: Vec<f64> = (0..n_projections)
        .into_par_iter()
        .map(|p| {
            let dir = dirs.row(p);
            let y1: Array1<f64> = x1.dot(&dir);
            let y2: Array1<f64> = x2.dot(&dir);
            tv_1d(y1.as_slice().expect("contiguous"), y2.as_slice().expect("contiguous"))
        })
        .collect();
    Ok(tvs.iter().sum::<f64>() / n_projections as f64)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CrossEntropy {
    pub value: f64,
    /// Points where the model density is not positive; each contributes
    /// `-LOG_FLOOR` to the sum.
    pub n_nonpositive: usize,
    pub n: usize,
}

/// `−(1/n) Σ log q(x_i)` for a normalized model.
pub fn cross_entropy(model: &DensityModel, data: ArrayView2<f64>) -> Result<CrossEntropy> {
    if data.ncols() != model.dim() {
        return Err(Error::Shape(format!("data has {} columns, model has {}", data.ncols(), model.dim())));
    }
    if data.nrows() == 0 {
        return Err(Error::Data("no samples".into()));
    }
    let logs: Vec<Option<f64>> = data
        .rows()
        .into_iter()
        .collect::<Vec<_>>()
        .par_iter()
        .map(|row| {
            let q = match row.as_slice() {
                Some(x) => model.evaluate(x)?,
                None => model.evaluate(&row.to_vec())?,
            };
            Ok(if q > 0.0 { Some(q.ln().max(LOG_FLOOR)) } else { None })
        })
        .collect::<Result<_>>()?;
    let n_nonpositive = logs.iter().filter(|l| l.is_none()).count();
    let sum: f64 = logs.iter().map(|l| l.unwrap_or(LOG_FLOOR)).sum();
    Ok(CrossEntropy { value: -sum / data.nrows() as f64, n_nonpositive, n: data.nrows() })
}

/// Fraction of the domain box where the model density is negative,
/// estimated from `n` uniform points.
pub fn negative_density_fraction(model: &DensityModel, n: usize, seed: u64) -> Result<f64> {
    if n == 0 {
        return Err(Error::InvalidArgument("need at least one point".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let domains: Vec<(f64, f64)> = model.bases().iter().map(|b| b.domain()).collect();
    let points: Vec<Vec<f64>> =
        (0..n).map(|_| domains.iter().map(|&(a, b)| a + (b - a) * rng.random::<f64>()).collect()).collect();
    let negative: Vec<bool> =
        points.par_iter().map(|x| model.evaluate(x).map(|q| q < 0.0)).collect::<Result<_>>()?;
    Ok(negative.iter().filter(|&&v| v).count() as f64 / n as f64)
}
