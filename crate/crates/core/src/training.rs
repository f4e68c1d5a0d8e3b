//! Losses, gradients and optimizers.
//!
//! The plain model minimizes `⟨α, Dα⟩ − (2/b) Σ ⟨α, Φ(x_i)⟩`, an unbiased
//! estimate of the squared L2 distance to the data density minus a constant.
//! Its gradient `2Dα − (2/b) Σ Φ(x_i)` is kept in structured form: a Gram
//! applied TT of the same ranks plus one rank-1 term per point. Riemannian
//! steps project that gradient onto the tangent space of the fixed-rank
//! manifold analytically, take the exact minimizer of the loss along the
//! projected direction and retract by rounding.
//!
//! The squared model minimizes the negative log-likelihood
//! `−(1/b) Σ log ⟨α, Φ(x_i)⟩² + log ⟨α, Dα⟩` with Adam on the cores.

use std::io::Write;
use std::time::Instant;

use ndarray::{Array2, Array3, ArrayView2, Axis};
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::basis::{BasisSet, LocalEval};
use crate::data::Dataset;
use crate::density::{DensityModel, Variant};
use crate::error::{Error, Result};
use crate::init::{pad_rank, random_init, rank1_init};
use crate::tt_core::{
    core_vec, fold, left_env_step, right_env_step, sandwich, unfold_left, vec_core, Orthogonalization, TTTensor,
};

/// Log of the smallest positive double, used in place of `log 0`.
pub const LOG_FLOOR: f64 = -745.0;

/// Points per work unit when reducing per-point terms; fixed so that sums do
/// not depend on the thread count.
const CHUNK: usize = 128;

/// Basis evaluations of every row of `batch`.
pub fn batch_evals(bases: &[BasisSet], batch: ArrayView2<f64>) -> Result<Vec<Vec<LocalEval>>> {
    if batch.ncols() != bases.len() {
        return Err(Error::Shape(format!("batch has {} columns, model has {}", batch.ncols(), bases.len())));
    }
    Ok(batch
        .rows()
        .into_iter()
        .map(|row| row.iter().zip(bases).map(|(&x, b)| b.eval_local(x)).collect())
        .collect())
}

/// Contractions of `t` with each point's rank-1 tensor, summed in a fixed order.
fn point_values(t: &TTTensor, evals: &[Vec<LocalEval>]) -> Vec<f64> {
    evals.par_iter().map(|ev| t.contract_local(ev)).collect()
}

fn ordered_sum(values: &[f64]) -> f64 {
    values.iter().sum()
}

/// Prefix environments (`out[0] = [[1]]`) and suffix environments
/// (`out[d] = [[1]]`) of the pair `(a, b)`.
fn pair_envs(a: &[Array3<f64>], b: &[Array3<f64>]) -> (Vec<Array2<f64>>, Vec<Array2<f64>>) {
    let d = a.len();
    let mut left = Vec::with_capacity(d + 1);
    left.push(Array2::ones((1, 1)));
    for k in 0..d {
        let next = left_env_step(&left[k], &a[k], &b[k]);
        left.push(next);
    }
    let mut right = vec![Array2::ones((1, 1)); d + 1];
    for k in (0..d).rev() {
        right[k] = right_env_step(&right[k + 1], &a[k], &b[k]);
    }
    (left, right)
}

/// `out[k] = Σ_i c_i · l_i^k ⊗ f(x_ik) ⊗ r_i^{k+1}`, where `l` contracts the
/// point through the `left` cores and `r` through the `right` cores. `coef`
/// receives the point index and its full contraction through `left`; the
/// contractions are returned as well.
fn outer_terms<F>(left: &[Array3<f64>], right: &[Array3<f64>], evals: &[Vec<LocalEval>], coef: F) -> (Vec<Array3<f64>>, Vec<f64>)
where
    F: Fn(usize, f64) -> f64 + Sync,
{
    let d = left.len();
    let shapes: Vec<(usize, usize, usize)> =
        (0..d).map(|k| (left[k].dim().0, left[k].dim().1, right[k].dim().2)).collect();
    let zeros = || shapes.iter().map(|&s| Array3::<f64>::zeros(s)).collect::<Vec<_>>();
    let partials: Vec<(Vec<Array3<f64>>, Vec<f64>)> = evals
        .par_chunks(CHUNK)
        .enumerate()
        .map(|(chunk, pts)| {
            let mut acc = zeros();
            let mut values = Vec::with_capacity(pts.len());
            let mut prefixes: Vec<Vec<f64>> = Vec::with_capacity(d + 1);
            for (offset, ev) in pts.iter().enumerate() {
                let i = chunk * CHUNK + offset;
                if ev.iter().any(LocalEval::is_empty) {
                    values.push(0.0);
                    continue;
                }
                prefixes.clear();
                prefixes.push(vec![1.0]);
                for k in 0..d {
                    let next = vec_core(&prefixes[k], &left[k], ev[k].start, ev[k].values());
                    prefixes.push(next);
                }
                let value = prefixes[d][0];
                values.push(value);
                let c = coef(i, value);
                if c == 0.0 {
                    continue;
                }
                let mut suffix = vec![1.0];
                for k in (0..d).rev() {
                    let (_, m, r1) = shapes[k];
                    let data = acc[k].as_slice_mut().expect("standard layout");
                    let f = ev[k].values();
                    for (a, &la) in prefixes[k].iter().enumerate() {
                        let ca = c * la;
                        if ca == 0.0 {
                            continue;
                        }
                        for (s, &fs) in f.iter().enumerate() {
                            let cas = ca * fs;
                            let base = (a * m + ev[k].start + s) * r1;
                            for (o, &rb) in data[base..base + r1].iter_mut().zip(&suffix) {
                                *o += cas * rb;
                            }
                        }
                    }
                    if k > 0 {
                        suffix = core_vec(&right[k], ev[k].start, f, &suffix);
                    }
                }
            }
            (acc, values)
        })
        .collect();
    let mut total = zeros();
    let mut values = Vec::with_capacity(evals.len());
    for (part, vals) in partials {
        for (t, p) in total.iter_mut().zip(part) {
            *t += &p;
        }
        values.extend(vals);
    }
    (total, values)
}

/// `⟨α, Dα⟩ − (2/b) Σ ⟨α, Φ(x_i)⟩` for a plain model (its `Z` is ignored).
pub fn l2_loss(model: &DensityModel, batch: ArrayView2<f64>) -> Result<f64> {
    let evals = batch_evals(model.bases(), batch)?;
    let alpha = model.alpha();
    let applied = alpha.apply_gram_operator(model.grams())?;
    let quad = alpha.inner_product(&applied)?;
    if evals.is_empty() {
        return Ok(quad);
    }
    let data = ordered_sum(&point_values(alpha, &evals));
    Ok(quad - 2.0 * data / evals.len() as f64)
}

/// Euclidean gradient of [`l2_loss`], `2Dα − (2/b) Σ Φ(x_i)`, in structured form.
#[derive(Debug, Clone)]
pub struct L2Gradient {
    gram_applied: TTTensor,
    evals: Vec<Vec<LocalEval>>,
}

impl L2Gradient {
    /// `Dα`.
    pub fn gram_applied(&self) -> &TTTensor {
        &self.gram_applied
    }

    pub fn batch_size(&self) -> usize {
        self.evals.len()
    }

    fn data_coef(&self) -> f64 {
        -2.0 / self.evals.len().max(1) as f64
    }

    /// `⟨∇, H⟩`.
    pub fn directional(&self, h: &TTTensor) -> Result<f64> {
        let quad = 2.0 * h.inner_product(&self.gram_applied)?;
        Ok(quad + self.data_coef() * ordered_sum(&point_values(h, &self.evals)))
    }

    /// The gradient as an explicit TT (ranks grow with the batch); for tests
    /// and small problems.
    pub fn to_tt(&self) -> Result<TTTensor> {
        let mut acc = self.gram_applied.scale(2.0);
        let m: Vec<usize> = acc.mode_sizes();
        let c = self.data_coef();
        for ev in &self.evals {
            let mut vectors: Vec<Vec<f64>> = ev.iter().zip(&m).map(|(e, &mk)| e.to_dense(mk)).collect();
            vectors[0].iter_mut().for_each(|v| *v *= c);
            acc = acc.add(&TTTensor::rank1_from_vectors(&vectors)?)?;
        }
        Ok(acc)
    }
}

pub fn l2_gradient(model: &DensityModel, batch: ArrayView2<f64>) -> Result<L2Gradient> {
    Ok(L2Gradient {
        gram_applied: model.alpha().apply_gram_operator(model.grams())?,
        evals: batch_evals(model.bases(), batch)?,
    })
}

/// Gradient of [`l2_loss`] with respect to every core entry.
pub fn l2_core_gradient(model: &DensityModel, batch: ArrayView2<f64>) -> Result<(f64, Vec<Array3<f64>>)> {
    let grad = l2_gradient(model, batch)?;
    let alpha = model.alpha().cores();
    let applied = grad.gram_applied.cores();
    let (left, right) = pair_envs(alpha, applied);
    let quad = left[alpha.len()][[0, 0]];
    let c = grad.data_coef();
    let (mut cores, values) = outer_terms(alpha, alpha, &grad.evals, |_, _| c);
    for (k, core) in cores.iter_mut().enumerate() {
        *core += &(sandwich(&left[k], &applied[k], &right[k + 1].t().to_owned()) * 2.0);
    }
    let loss = quad + c * ordered_sum(&values);
    Ok((loss, cores))
}

/// Negative log-likelihood of a squared model with `Z` recomputed from `α`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NllValue {
    pub loss: f64,
    /// Points whose amplitude underflowed and hit [`LOG_FLOOR`].
    pub n_floored: usize,
}

fn log_square(s: f64) -> Option<f64> {
    let v = (s * s).ln();
    if s == 0.0 || !(v >= LOG_FLOOR) {
        None
    } else {
        Some(v)
    }
}

pub fn nll_loss(model: &DensityModel, batch: ArrayView2<f64>) -> Result<NllValue> {
    let evals = batch_evals(model.bases(), batch)?;
    let alpha = model.alpha();
    let z = alpha.inner_product(&alpha.apply_gram_operator(model.grams())?)?;
    if !(z > 0.0) {
        return Err(Error::Numeric(format!("squared model has non-positive mass {z}")));
    }
    let values = point_values(alpha, &evals);
    Ok(nll_from_values(&values, z))
}

fn nll_from_values(values: &[f64], z: f64) -> NllValue {
    let mut n_floored = 0;
    let mut sum = 0.0;
    for &s in values {
        match log_square(s) {
            Some(v) => sum += v,
            None => {
                n_floored += 1;
                sum += LOG_FLOOR;
            }
        }
    }
    let b = values.len().max(1) as f64;
    NllValue { loss: -sum / b + z.ln(), n_floored }
}

/// [`nll_loss`] and its gradient with respect to every core entry.
/// Floored points contribute no gradient.
pub fn nll_core_gradient(model: &DensityModel, batch: ArrayView2<f64>) -> Result<(NllValue, Vec<Array3<f64>>)> {
    let evals = batch_evals(model.bases(), batch)?;
    let alpha = model.alpha().cores();
    let applied = model.alpha().apply_gram_operator(model.grams())?;
    let (left, right) = pair_envs(alpha, applied.cores());
    let z = left[alpha.len()][[0, 0]];
    if !(z > 0.0) {
        return Err(Error::Numeric(format!("squared model has non-positive mass {z}")));
    }
    let b = evals.len().max(1) as f64;
    let (mut cores, values) = outer_terms(alpha, alpha, &evals, |_, s| match log_square(s) {
        Some(_) => -2.0 / (b * s),
        None => 0.0,
    });
    for (k, core) in cores.iter_mut().enumerate() {
        *core += &(sandwich(&left[k], &applied.cores()[k], &right[k + 1].t().to_owned()) * (2.0 / z));
    }
    Ok((nll_from_values(&values, z), cores))
}

/// Loss used for training and validation: L2 for plain models, NLL for squared.
pub fn objective(model: &DensityModel, batch: ArrayView2<f64>) -> Result<f64> {
    match model.variant() {
        Variant::Plain => l2_loss(model, batch),
        Variant::Squared => Ok(nll_loss(model, batch)?.loss),
    }
}

/// Loss and core gradient of [`objective`].
pub fn core_gradient(model: &DensityModel, batch: ArrayView2<f64>) -> Result<(f64, Vec<Array3<f64>>)> {
    match model.variant() {
        Variant::Plain => l2_core_gradient(model, batch),
        Variant::Squared => nll_core_gradient(model, batch).map(|(v, g)| (v.loss, g)),
    }
}

/// Element of the tangent space at the point described by `frames`:
/// `Σ_k U_{<k} δ_k V_{>k}`, with `U_kᵀ δ_k = 0` for `k < d` once gauged.
#[derive(Debug, Clone)]
pub struct TangentVector<'a> {
    deltas: Vec<Array3<f64>>,
    frames: &'a Orthogonalization,
}

impl<'a> TangentVector<'a> {
    /// Wraps delta cores after checking their shapes; no gauge is applied.
    pub fn from_deltas(frames: &'a Orthogonalization, deltas: Vec<Array3<f64>>) -> Result<Self> {
        if deltas.len() != frames.ndim() {
            return Err(Error::Shape(format!("{} delta cores for {} dimensions", deltas.len(), frames.ndim())));
        }
        for (k, delta) in deltas.iter().enumerate() {
            if delta.dim() != frames.left_core(k).dim() {
                return Err(Error::Shape(format!("delta core {k} has shape {:?}", delta.dim())));
            }
        }
        Ok(Self { deltas, frames })
    }

    pub fn deltas(&self) -> &[Array3<f64>] {
        &self.deltas
    }

    pub fn frames(&self) -> &Orthogonalization {
        self.frames
    }

    /// Removes the components of `δ_k` (`k < d`) in the range of `U_k`, which
    /// leaves the embedded tensor's projection unchanged only if the input
    /// came from a projection; callers use it to enforce the gauge.
    pub fn gauged(mut self) -> Self {
        let d = self.deltas.len();
        for k in 0..d.saturating_sub(1) {
            let u = unfold_left(self.frames.left_core(k));
            let delta = unfold_left(&self.deltas[k]);
            let fixed = &delta - &u.dot(&u.t().dot(&delta));
            self.deltas[k] = fold(fixed, self.deltas[k].dim());
        }
        self
    }

    /// Largest `|U_kᵀ δ_k|` entry over `k < d`.
    pub fn gauge_residual(&self) -> f64 {
        let d = self.deltas.len();
        (0..d.saturating_sub(1))
            .map(|k| {
                let u = unfold_left(self.frames.left_core(k));
                u.t().dot(&unfold_left(&self.deltas[k])).iter().fold(0.0f64, |m, v| m.max(v.abs()))
            })
            .fold(0.0, f64::max)
    }

    pub fn scaled(&self, c: f64) -> Self {
        Self { deltas: self.deltas.iter().map(|d| d * c).collect(), frames: self.frames }
    }

    /// `⟨T, T'⟩ = Σ_k ⟨δ_k, δ'_k⟩`, valid for gauged vectors at the same point.
    pub fn inner(&self, other: &Self) -> f64 {
        self.deltas.iter().zip(&other.deltas).map(|(a, b)| (a * b).sum()).sum()
    }

    pub fn norm(&self) -> f64 {
        self.inner(self).sqrt()
    }

    /// The embedded tensor, with TT ranks at most twice those of the frames.
    pub fn to_tt(&self) -> Result<TTTensor> {
        self.embed(1.0, None)
    }

    /// `X + t·T` where `X` is the base point, with ranks at most `2r`.
    pub fn retract_sum(&self, t: f64) -> Result<TTTensor> {
        let d = self.deltas.len();
        self.embed(t, Some(self.frames.center_core(d - 1)))
    }

    /// Block cores `[t δ_1  U_1]`, `[[V_k 0] [t δ_k U_k]]`, `[V_d; t δ_d + S]`.
    fn embed(&self, t: f64, base: Option<&Array3<f64>>) -> Result<TTTensor> {
        let d = self.deltas.len();
        let f = self.frames;
        if d == 1 {
            let mut core = &self.deltas[0] * t;
            if let Some(s) = base {
                core += s;
            }
            return TTTensor::new(vec![core]);
        }
        let mut cores = Vec::with_capacity(d);
        for k in 0..d {
            let (r0, m, r1) = self.deltas[k].dim();
            let delta = &self.deltas[k] * t;
            let core = if k == 0 {
                let mut c = Array3::zeros((1, m, 2 * r1));
                c.slice_mut(ndarray::s![.., .., ..r1]).assign(&delta);
                c.slice_mut(ndarray::s![.., .., r1..]).assign(f.left_core(0));
                c
            } else if k + 1 == d {
                let mut last = delta;
                if let Some(s) = base {
                    last += s;
                }
                let mut c = Array3::zeros((2 * r0, m, 1));
                c.slice_mut(ndarray::s![..r0, .., ..]).assign(f.right_core(k));
                c.slice_mut(ndarray::s![r0.., .., ..]).assign(&last);
                c
            } else {
                let mut c = Array3::zeros((2 * r0, m, 2 * r1));
                c.slice_mut(ndarray::s![..r0, .., ..r1]).assign(f.right_core(k));
                c.slice_mut(ndarray::s![r0.., .., ..r1]).assign(&delta);
                c.slice_mut(ndarray::s![r0.., .., r1..]).assign(f.left_core(k));
                c
            };
            cores.push(core);
        }
        TTTensor::new(cores)
    }
}

/// Orthogonal projection of an explicit TT onto the tangent space.
pub fn project_tt<'a>(frames: &'a Orthogonalization, z: &TTTensor) -> Result<TangentVector<'a>> {
    if z.mode_sizes() != frames.left_cores().iter().map(|c| c.dim().1).collect::<Vec<_>>() {
        return Err(Error::Shape("tensor and frames differ in mode sizes".into()));
    }
    let deltas = project_raw(frames, z.cores());
    Ok(TangentVector { deltas, frames }.gauged())
}

/// `U_{<k}ᵀ Z V_{>k}ᵀ` for every `k`, before the gauge.
fn project_raw(frames: &Orthogonalization, z: &[Array3<f64>]) -> Vec<Array3<f64>> {
    let (left, _) = pair_envs(frames.left_cores(), z);
    let (_, right) = pair_envs(frames.right_cores(), z);
    (0..z.len()).map(|k| sandwich(&left[k], &z[k], &right[k + 1].t().to_owned())).collect()
}

/// Riemannian gradient: the tangent projection of the structured L2 gradient.
pub fn project_to_tangent<'a>(frames: &'a Orthogonalization, grad: &L2Gradient) -> Result<TangentVector<'a>> {
    let mut deltas = project_raw(frames, grad.gram_applied.cores());
    deltas.iter_mut().for_each(|d| *d *= 2.0);
    let c = grad.data_coef();
    let (terms, _) = outer_terms(frames.left_cores(), frames.right_cores(), &grad.evals, |_, _| c);
    for (d, t) in deltas.iter_mut().zip(terms) {
        *d += &t;
    }
    Ok(TangentVector { deltas, frames }.gauged())
}

/// Exact minimizer of `t ↦ l2_loss(α + t G)` for the embedded direction `G`;
/// zero when `⟨G, DG⟩ ≤ 1e-14`.
pub fn optimal_step(model: &DensityModel, grad: &L2Gradient, direction: &TangentVector) -> Result<f64> {
    let g = direction.to_tt()?;
    let curvature = g.inner_product(&g.apply_gram_operator(model.grams())?)?;
    if !(curvature > 1e-14) {
        return Ok(0.0);
    }
    let slope = g.inner_product(&grad.gram_applied)?
        - ordered_sum(&point_values(&g, &grad.evals)) / grad.evals.len().max(1) as f64;
    Ok(-slope / curvature)
}

#[derive(Debug, Clone)]
pub struct RiemannianStep {
    pub alpha: TTTensor,
    pub step: f64,
    pub grad_norm: f64,
}

/// Orthogonalize, project the gradient, step to the minimum of the loss along
/// the negative projected gradient, and round back to rank `rank`.
pub fn riemannian_step(model: &DensityModel, batch: ArrayView2<f64>, rank: usize) -> Result<RiemannianStep> {
    let frames = model.alpha().left_right_orthogonalize();
    let grad = l2_gradient(model, batch)?;
    let direction = project_to_tangent(&frames, &grad)?.scaled(-1.0);
    let grad_norm = direction.norm();
    let unchanged = |step| RiemannianStep { alpha: model.alpha().clone(), step, grad_norm };
    if !(grad_norm > 0.0) {
        return Ok(unchanged(0.0));
    }
    let step = optimal_step(model, &grad, &direction)?;
    if step == 0.0 {
        return Ok(unchanged(0.0));
    }
    let alpha = direction.retract_sum(step)?.round(rank)?;
    Ok(RiemannianStep { alpha, step, grad_norm })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AdamConfig {
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
}

impl Default for AdamConfig {
    fn default() -> Self {
        Self { learning_rate: 1e-3, beta1: 0.9, beta2: 0.999, epsilon: 1e-8 }
    }
}

/// Adam on the raw core entries.
#[derive(Debug, Clone)]
pub struct CoreAdam {
    config: AdamConfig,
    first: Vec<Array3<f64>>,
    second: Vec<Array3<f64>>,
    t: i32,
}

impl CoreAdam {
    pub fn new(config: AdamConfig, tensor: &TTTensor) -> Self {
        let zeros: Vec<Array3<f64>> = tensor.cores().iter().map(|c| Array3::zeros(c.dim())).collect();
        Self { config, first: zeros.clone(), second: zeros, t: 0 }
    }

    pub fn iterations(&self) -> i32 {
        self.t
    }

    pub fn step(&mut self, tensor: &TTTensor, grads: &[Array3<f64>]) -> Result<TTTensor> {
        if grads.len() != tensor.ndim() || grads.iter().zip(tensor.cores()).any(|(g, c)| g.dim() != c.dim()) {
            return Err(Error::Shape("gradient does not match the cores".into()));
        }
        let AdamConfig { learning_rate, beta1, beta2, epsilon } = self.config;
        self.t += 1;
        let c1 = 1.0 - beta1.powi(self.t);
        let c2 = 1.0 - beta2.powi(self.t);
        let mut cores = Vec::with_capacity(grads.len());
        for ((core, g), (m, v)) in tensor.cores().iter().zip(grads).zip(self.first.iter_mut().zip(self.second.iter_mut())) {
            m.zip_mut_with(g, |mi, &gi| *mi = beta1 * *mi + (1.0 - beta1) * gi);
            v.zip_mut_with(g, |vi, &gi| *vi = beta2 * *vi + (1.0 - beta2) * gi * gi);
            let mut next = core.clone();
            ndarray::Zip::from(&mut next).and(&*m).and(&*v).for_each(|x, &mi, &vi| {
                *x -= learning_rate * (mi / c1) / ((vi / c2).sqrt() + epsilon);
            });
            cores.push(next);
        }
        TTTensor::new(cores)
    }
}

/// One Adam update of `model`'s cores on `batch`; returns the loss before the step.
pub fn core_adam_step(model: &DensityModel, batch: ArrayView2<f64>, adam: &mut CoreAdam) -> Result<(TTTensor, f64)> {
    let (loss, grads) = core_gradient(model, batch)?;
    Ok((adam.step(model.alpha(), &grads)?, loss))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Optimizer {
    Riemannian,
    Adam,
}

impl std::str::FromStr for Optimizer {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "riemannian" => Ok(Optimizer::Riemannian),
            "adam" => Ok(Optimizer::Adam),
            other => Err(Error::InvalidArgument(format!("unknown optimizer `{other}`"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum InitKind {
    Rank1,
    Random,
}

impl std::str::FromStr for InitKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "rank1" => Ok(InitKind::Rank1),
            "random" => Ok(InitKind::Random),
            other => Err(Error::InvalidArgument(format!("unknown init `{other}`"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub variant: Variant,
    pub rank: usize,
    pub basis_size: usize,
    pub degree: usize,
    pub batch_size: usize,
    pub max_iters: usize,
    pub optimizer: Optimizer,
    pub init: InitKind,
    /// Adam only.
    pub learning_rate: f64,
    pub validation_fraction: f64,
    pub seed: u64,
    /// Iterations between validation passes; one epoch when unset.
    pub eval_every: Option<usize>,
    pub checkpoint_every: Option<usize>,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            variant: Variant::Plain,
            rank: 8,
            basis_size: 32,
            degree: 2,
            batch_size: 1024,
            max_iters: 1000,
            optimizer: Optimizer::Riemannian,
            init: InitKind::Rank1,
            learning_rate: AdamConfig::default().learning_rate,
            validation_fraction: 0.1,
            seed: 0,
            eval_every: None,
            checkpoint_every: None,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidArgument(msg));
        if self.rank == 0 {
            return bad("rank must be at least 1".into());
        }
        if self.basis_size < self.degree + 1 {
            return bad(format!("basis size {} must be at least degree + 1 = {}", self.basis_size, self.degree + 1));
        }
        if self.batch_size == 0 {
            return bad("batch size must be at least 1".into());
        }
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return bad("learning rate must be positive".into());
        }
        if !(0.0..1.0).contains(&self.validation_fraction) {
            return bad("validation fraction must be in [0, 1)".into());
        }
        if self.variant == Variant::Squared && self.optimizer == Optimizer::Riemannian {
            return bad("the squared variant trains with adam; riemannian steps need the L2 loss".into());
        }
        if self.eval_every == Some(0) || self.checkpoint_every == Some(0) {
            return bad("intervals must be at least 1".into());
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LogEntry {
    pub iter: usize,
    pub train_loss: f64,
    pub val_loss: Option<f64>,
    pub seconds: f64,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct TrainLog {
    pub entries: Vec<LogEntry>,
}

impl TrainLog {
    /// CSV with header `iter,train_loss,val_loss,seconds`.
    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        self.write_csv_columns(writer, true)
    }

    /// Same as [`write_csv`](Self::write_csv); without `timing` the
    /// wall-clock column is dropped and the output depends only on the run's inputs.
    pub fn write_csv_columns<W: Write>(&self, writer: W, timing: bool) -> Result<()> {
        let mut wtr = csv::Writer::from_writer(writer);
        let mut header = vec!["iter", "train_loss", "val_loss"];
        if timing {
            header.push("seconds");
        }
        wtr.write_record(&header)?;
        for e in &self.entries {
            let val = e.val_loss.map(|v| v.to_string()).unwrap_or_default();
            let mut rec = vec![e.iter.to_string(), e.train_loss.to_string(), val];
            if timing {
                rec.push(e.seconds.to_string());
            }
            wtr.write_record(&rec)?;
        }
        wtr.flush()?;
        Ok(())
    }
}

#[derive(Debug, Clone)]
pub struct TrainOutput {
    /// Best-validation model, normalized.
    pub model: DensityModel,
    pub log: TrainLog,
    pub best_iter: usize,
    pub best_val_loss: Option<f64>,
    /// Dimensions whose rank-1 initialization needed the ridge fallback.
    pub ridged_dims: Vec<usize>,
}

pub fn train(config: &TrainConfig, data: &Dataset) -> Result<TrainOutput> {
    train_with(config, data, |_, _| Ok(()))
}

/// Like [`train`], calling `checkpoint(iter, model)` every
/// `config.checkpoint_every` iterations with the current model.
pub fn train_with<F>(config: &TrainConfig, data: &Dataset, mut checkpoint: F) -> Result<TrainOutput>
where
    F: FnMut(usize, &DensityModel) -> Result<()>,
{
    config.validate()?;
    let start = Instant::now();
    let data = if data.validation_indices().is_empty() && config.validation_fraction > 0.0 {
        data.clone().split(config.validation_fraction, config.seed)?
    } else {
        data.clone()
    };
    let train_x = data.train_samples();
    let val_x = data.validation_samples();
    let bases = data
        .bounds()
        .iter()
        .map(|&(a, b)| BasisSet::new(config.degree, config.basis_size, a, b))
        .collect::<Result<Vec<_>>>()?;
    let modes = vec![config.basis_size; bases.len()];

    let mut ridged_dims = Vec::new();
    let alpha = match config.init {
        InitKind::Rank1 => {
            let init = rank1_init(train_x.view(), &bases, config.variant)?;
            ridged_dims = init.ridged;
            match config.optimizer {
                Optimizer::Riemannian => init.tensor,
                Optimizer::Adam => {
                    let t = &init.tensor;
                    let n: usize = t.num_params();
                    let rms = (t.cores().iter().map(|c| c.iter().map(|v| v * v).sum::<f64>()).sum::<f64>() / n as f64).sqrt();
                    pad_rank(t, config.rank, 1e-2 * rms, config.seed)?
                }
            }
        }
        InitKind::Random => random_init(&modes, config.rank, config.seed)?,
    };
    let mut model = DensityModel::new(alpha, bases, config.variant)?;

    let n_train = train_x.nrows();
    let full_batch = config.batch_size >= n_train;
    let eval_every = config.eval_every.unwrap_or_else(|| n_train.div_ceil(config.batch_size)).max(1);
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    rng.set_stream(1);
    let mut order: Vec<usize> = (0..n_train).collect();
    let mut cursor = n_train;
    let mut adam = CoreAdam::new(
        AdamConfig { learning_rate: config.learning_rate, ..AdamConfig::default() },
        model.alpha(),
    );

    let has_val = val_x.nrows() > 0;
    let check = |iter: usize, what: &str, v: f64| -> Result<f64> {
        if v.is_finite() {
            Ok(v)
        } else {
            Err(Error::Numeric(format!("{what} loss became {v} at iteration {iter}")))
        }
    };
    let mut log = TrainLog::default();
    let first_loss = check(0, "training", objective(&model, train_x.view())?)?;
    let first_val = if has_val { Some(check(0, "validation", objective(&model, val_x.view())?)?) } else { None };
    log.entries.push(LogEntry { iter: 0, train_loss: first_loss, val_loss: first_val, seconds: start.elapsed().as_secs_f64() });
    let mut best = (0usize, first_val, model.alpha().clone());

    for iter in 1..=config.max_iters {
        let batch: Array2<f64> = if full_batch {
            train_x.clone()
        } else {
            if cursor + config.batch_size > n_train {
                order.shuffle(&mut rng);
                cursor = 0;
            }
            let idx = &order[cursor..cursor + config.batch_size];
            cursor += config.batch_size;
            train_x.select(Axis(0), idx)
        };
        let next = match config.optimizer {
            Optimizer::Riemannian => riemannian_step(&model, batch.view(), config.rank)?.alpha,
            Optimizer::Adam => {
                let (next, loss) = core_adam_step(&model, batch.view(), &mut adam)?;
                check(iter, "training", loss)?;
                next
            }
        };
        model = model.with_alpha(next)?;

        if iter % eval_every == 0 || iter == config.max_iters {
            let train_loss = check(iter, "training", objective(&model, batch.view())?)?;
            let val_loss = if has_val { Some(check(iter, "validation", objective(&model, val_x.view())?)?) } else { None };
            log.entries.push(LogEntry { iter, train_loss, val_loss, seconds: start.elapsed().as_secs_f64() });
            let better = match (val_loss, best.1) {
                (Some(v), Some(b)) => v < b,
                _ => true,
            };
            if better {
                best = (iter, val_loss, model.alpha().clone());
            }
        }
        if let Some(every) = config.checkpoint_every {
            if iter % every == 0 {
                let current = model.normalize().unwrap_or_else(|_| model.clone());
                checkpoint(iter, &current)?;
            }
        }
    }

    let (best_iter, best_val_loss, alpha) = best;
    let model = model.with_alpha(alpha)?.normalize()?;
    Ok(TrainOutput { model, log, best_iter, best_val_loss, ridged_dims })
}
