//! Exact autoregressive sampling by inverting one-dimensional conditional CDFs.

use ndarray::{Array2, Array3};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::basis::BasisSet;
use crate::density::{plain_inner, DensityModel, SquaredInner, Variant};
use crate::error::{Error, Result};
use crate::tt_core::vec_core;

/// Bisection steps per coordinate.
pub const DEFAULT_SEARCH_ITERS: usize = 30;

/// Fresh uniform draws tried per row before giving up.
pub const MAX_RETRIES: usize = 100;

/// Bisection on a nondecreasing (after clamping) function. Returns `a` when
/// `u ≤ cdf(a)` and `b` when `u ≥ cdf(b)`; otherwise the midpoint of the final
/// bracket, which is within `(b - a) / 2^iters` of a crossing.
pub fn invert_cdf<F: Fn(f64) -> f64>(cdf: F, u: f64, domain: (f64, f64), iters: usize) -> f64 {
    let (a, b) = domain;
    if u <= cdf(a) {
        return a;
    }
    if u >= cdf(b) {
        return b;
    }
    let (mut lo, mut hi) = (a, b);
    for _ in 0..iters {
        let mid = 0.5 * (lo + hi);
        if cdf(mid) < u {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

#[derive(Debug, Clone)]
enum RightEnvs {
    Plain(Vec<Vec<f64>>),
    Squared(Vec<Array2<f64>>),
}

/// Work counters, in multiply-adds.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct OpCount {
    /// Core contractions: inner environments and left-environment updates.
    pub core: u64,
    /// Conditional CDF evaluations during root search.
    pub search_evals: u64,
}

impl OpCount {
    fn merge(self, other: Self) -> Self {
        Self { core: self.core + other.core, search_evals: self.search_evals + other.search_evals }
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct SampleReport {
    /// Rows that needed fresh uniforms because a conditional had no positive mass.
    pub rows_retried: usize,
    /// Total extra draws over all rows.
    pub retries: usize,
    pub ops: OpCount,
}

#[derive(Debug, Clone)]
pub struct Samples {
    pub samples: Array2<f64>,
    pub report: SampleReport,
}

/// Coordinates fixed so far and the matching left environment `Q^left`.
/// For squared models the environment is `v vᵀ`; only `v` is stored.
#[derive(Debug, Clone, PartialEq)]
pub struct Prefix {
    values: Vec<f64>,
    q_left: Vec<f64>,
}

impl Prefix {
    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn q_left(&self) -> &[f64] {
        &self.q_left
    }
}

/// Unnormalized conditional mass `ξ_k < A`, tabulated per knot interval.
pub struct Conditional<'m> {
    basis: &'m BasisSet,
    cumulative: Vec<f64>,
    weights: Weights,
    total: f64,
}

enum Weights {
    /// `Q^inner` as a vector over basis functions.
    Plain(Vec<f64>),
    /// Per knot interval, the `(p+1)²` block of pairwise weights.
    Squared(Vec<f64>),
}

impl Conditional<'_> {
    /// Mass over the whole domain; the conditional's denominator.
    pub fn total(&self) -> f64 {
        self.total
    }

    pub fn mass_below(&self, upper: f64) -> f64 {
        let (a, b) = self.basis.domain();
        if upper <= a {
            return 0.0;
        }
        if upper >= b {
            return self.total;
        }
        let j = self.basis.interval_of(upper);
        let part = match &self.weights {
            Weights::Plain(q) => self.basis.partial_interval_dot(j, upper, q),
            Weights::Squared(blocks) => {
                let o2 = (self.basis.degree() + 1).pow(2);
                self.basis.partial_interval_block(j, upper, &blocks[j * o2..(j + 1) * o2])
            }
        };
        self.cumulative[j] + part
    }

    /// Conditional CDF clamped to `[0, 1]`.
    pub fn cdf(&self, upper: f64) -> f64 {
        (self.mass_below(upper) / self.total).clamp(0.0, 1.0)
    }
}

/// Read-only sampling context: the model plus its precomputed right environments.
#[derive(Debug, Clone)]
pub struct SamplerState<'m> {
    model: &'m DensityModel,
    q_right: RightEnvs,
    seed: u64,
    iters: usize,
}

impl<'m> SamplerState<'m> {
    pub fn new(model: &'m DensityModel, seed: u64) -> Self {
        let q_right = match model.variant() {
            Variant::Plain => RightEnvs::Plain(model.plain_right_envs()),
            Variant::Squared => RightEnvs::Squared(model.squared_right_envs()),
        };
        Self { model, q_right, seed, iters: DEFAULT_SEARCH_ITERS }
    }

    pub fn with_search_iters(mut self, iters: usize) -> Self {
        self.iters = iters;
        self
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn model(&self) -> &DensityModel {
        self.model
    }

    pub fn start(&self) -> Prefix {
        Prefix { values: Vec::with_capacity(self.model.dim()), q_left: vec![1.0] }
    }

    /// Fixes the next coordinate and updates `Q^left` with one core contraction.
    pub fn advance(&self, prefix: &mut Prefix, x: f64) -> Result<()> {
        self.advance_counted(prefix, x, &mut OpCount::default())
    }

    fn advance_counted(&self, prefix: &mut Prefix, x: f64, ops: &mut OpCount) -> Result<()> {
        let k = prefix.len();
        if k >= self.model.dim() {
            return Err(Error::Shape("prefix already covers every dimension".into()));
        }
        let core = self.model.alpha().core(k);
        let ev = self.model.bases()[k].eval_local(x);
        prefix.q_left = if ev.is_empty() {
            vec![0.0; core.dim().2]
        } else {
            ops.core += (core.dim().0 * ev.values().len() * core.dim().2) as u64;
            vec_core(&prefix.q_left, core, ev.start, ev.values())
        };
        prefix.values.push(x);
        Ok(())
    }

    /// Builds `Q^inner` for the coordinate after `prefix`.
    pub fn conditional(&self, prefix: &Prefix) -> Result<Conditional<'m>> {
        self.conditional_counted(prefix, &mut OpCount::default())
    }

    fn conditional_counted(&self, prefix: &Prefix, ops: &mut OpCount) -> Result<Conditional<'m>> {
        let k = prefix.len();
        if k >= self.model.dim() {
            return Err(Error::Shape("prefix already covers every dimension".into()));
        }
        let core: &Array3<f64> = self.model.alpha().core(k);
        let (r0, m, r1) = core.dim();
        let basis = &self.model.bases()[k];
        let n_int = basis.n_intervals();
        let mut cumulative = Vec::with_capacity(n_int + 1);
        cumulative.push(0.0);
        let weights = match &self.q_right {
            RightEnvs::Plain(right) => {
                let q = plain_inner(core, &prefix.q_left, &right[k + 1]);
                ops.core += (r0 * m * r1 + m * r1) as u64;
                for j in 0..n_int {
                    let next = cumulative[j] + basis.interval_dot(j, &q);
                    cumulative.push(next);
                }
                Weights::Plain(q)
            }
            RightEnvs::Squared(right) => {
                let inner = SquaredInner::new(core, &prefix.q_left, &right[k + 1]);
                let order = basis.degree() + 1;
                let mut blocks = Vec::with_capacity(n_int * order * order);
                for j in 0..n_int {
                    for s in 0..order {
                        for t in 0..order {
                            blocks.push(inner.w.row(j + s).dot(&inner.rw.row(j + t)));
                        }
                    }
                    let block = &blocks[j * order * order..];
                    let mass = basis.interval_form(j, |i, l| block[(i - j) * order + (l - j)]);
                    cumulative.push(cumulative[j] + mass);
                }
                ops.core += (r0 * m * r1 + m * r1 * r1 + n_int * order * order * r1) as u64;
                Weights::Squared(blocks)
            }
        };
        let total = cumulative[n_int];
        Ok(Conditional { basis, cumulative, weights, total })
    }

    /// `q(ξ_k < A | prefix)`, clamped to `[0, 1]`.
    pub fn conditional_cdf(&self, prefix: &Prefix, upper: f64) -> Result<f64> {
        let cond = self.conditional(prefix)?;
        if !(cond.total > 0.0) {
            return Err(Error::Sampling(format!(
                "conditional mass at prefix {:?} is not positive ({})",
                prefix.values, cond.total
            )));
        }
        Ok(cond.cdf(upper))
    }

    /// Maps one uniform vector to a sample. `None` when some conditional has
    /// no positive mass (possible only for plain models).
    pub fn sample_with_uniforms(&self, u: &[f64]) -> Result<Option<Vec<f64>>> {
        self.sample_with_uniforms_counted(u, &mut OpCount::default())
    }

    fn sample_with_uniforms_counted(&self, u: &[f64], ops: &mut OpCount) -> Result<Option<Vec<f64>>> {
        let d = self.model.dim();
        if u.len() != d {
            return Err(Error::Shape(format!("{} uniforms for a {d}-dimensional model", u.len())));
        }
        let mut prefix = self.start();
        for (k, &uk) in u.iter().enumerate() {
            let cond = self.conditional_counted(&prefix, ops)?;
            if !(cond.total > 0.0 && cond.total.is_finite()) {
                return Ok(None);
            }
            let evals = std::cell::Cell::new(0u64);
            let x = invert_cdf(
                |a| {
                    evals.set(evals.get() + 1);
                    cond.cdf(a)
                },
                uk,
                self.model.bases()[k].domain(),
                self.iters,
            );
            ops.search_evals += evals.get();
            if k + 1 < d {
                self.advance_counted(&mut prefix, x, ops)?;
            } else {
                prefix.values.push(x);
            }
        }
        Ok(Some(prefix.values))
    }

    /// Row `i` uses ChaCha stream `i` under the state's seed, so the output
    /// does not depend on how rows are spread over threads.
    fn sample_row(&self, row: usize) -> Result<(Vec<f64>, usize, OpCount)> {
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        rng.set_stream(row as u64);
        let mut u = vec![0.0; self.model.dim()];
        let mut ops = OpCount::default();
        for attempt in 0..=MAX_RETRIES {
            u.iter_mut().for_each(|v| *v = rng.random());
            if let Some(x) = self.sample_with_uniforms_counted(&u, &mut ops)? {
                return Ok((x, attempt, ops));
            }
        }
        Err(Error::Sampling(format!(
            "row {row}: no positive conditional mass after {MAX_RETRIES} retries"
        )))
    }

    pub fn sample(&self, n: usize) -> Result<Samples> {
        let d = self.model.dim();
        let rows: Vec<(Vec<f64>, usize, OpCount)> =
            (0..n).into_par_iter().map(|i| self.sample_row(i)).collect::<Result<_>>()?;
        let mut samples = Array2::zeros((n, d));
        let mut report = SampleReport::default();
        for (i, (x, retries, ops)) in rows.into_iter().enumerate() {
            samples.row_mut(i).assign(&ndarray::ArrayView1::from(&x[..]));
            report.retries += retries;
            report.rows_retried += usize::from(retries > 0);
            report.ops = report.ops.merge(ops);
        }
        Ok(Samples { samples, report })
    }
}

/// Draws `n` exact samples; bit-identical for a fixed seed.
pub fn sample(model: &DensityModel, n: usize, seed: u64) -> Result<Samples> {
    SamplerState::new(model, seed).sample(n)
}
