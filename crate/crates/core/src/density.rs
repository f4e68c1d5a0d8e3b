//! The density model `q(x) = ⟨α, Φ(x)⟩ / Z` (plain) or `⟨α, Φ(x)⟩² / Z`
//! (squared), with exact marginals, CDF slices and partition function.
//!
//! Plain queries contract `α` with a rank-1 tensor of basis evaluations and
//! integrals. Squared queries contract `α ⊗ α`; because every evaluated
//! coordinate contributes `f(x) f(x)ᵀ`, the left environment of a prefix is
//! the outer product `v vᵀ` of the plain prefix vector, so only `v` is kept.
//! Right environments are `r × r` matrices built from Gram matrices.

use std::path::Path;

use ndarray::{Array2, Array3, ArrayView2};
use serde::{Deserialize, Serialize};

use crate::basis::{BasisSet, BasisSpec, GramMatrix, LocalEval};
use crate::error::{Error, Result};
use crate::tt_core::{core_vec, right_env_step, vec_core, TTTensor};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Variant {
    Plain,
    Squared,
}

impl std::str::FromStr for Variant {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "plain" => Ok(Variant::Plain),
            "squared" => Ok(Variant::Squared),
            other => Err(Error::InvalidArgument(format!("unknown variant `{other}`"))),
        }
    }
}

/// Mean log-likelihood together with the number of points where `q(x) <= 0`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LogLikelihood {
    pub mean: f64,
    pub n_nonpositive: usize,
    pub n: usize,
}

#[derive(Debug, Clone)]
pub struct DensityModel {
    alpha: TTTensor,
    bases: Vec<BasisSet>,
    grams: Vec<GramMatrix>,
    variant: Variant,
    z: f64,
}

impl DensityModel {
    /// Builds an unnormalized model (`Z = 1`).
    pub fn new(alpha: TTTensor, bases: Vec<BasisSet>, variant: Variant) -> Result<Self> {
        if alpha.ndim() != bases.len() {
            return Err(Error::Shape(format!(
                "coefficient tensor has {} modes but {} bases were given",
                alpha.ndim(),
                bases.len()
            )));
        }
        for (k, (m, b)) in alpha.mode_sizes().iter().zip(&bases).enumerate() {
            if *m != b.size() {
                return Err(Error::Shape(format!("mode {k} has size {m} but its basis has {} functions", b.size())));
            }
        }
        let grams = bases.iter().map(BasisSet::gram_matrix).collect();
        Ok(Self { alpha, bases, grams, variant, z: 1.0 })
    }

    pub fn with_normalization(mut self, z: f64) -> Result<Self> {
        if !(z.is_finite() && z > 0.0) {
            return Err(Error::InvalidModel(format!("normalization constant must be positive, got {z}")));
        }
        self.z = z;
        Ok(self)
    }

    /// Same bases and variant with new coefficients; `Z` resets to 1.
    pub fn with_alpha(&self, alpha: TTTensor) -> Result<Self> {
        if alpha.mode_sizes() != self.alpha.mode_sizes() {
            return Err(Error::Shape("coefficient tensor does not match the bases".into()));
        }
        Ok(Self { alpha, bases: self.bases.clone(), grams: self.grams.clone(), variant: self.variant, z: 1.0 })
    }

    pub fn alpha(&self) -> &TTTensor {
        &self.alpha
    }

    pub fn bases(&self) -> &[BasisSet] {
        &self.bases
    }

    pub fn grams(&self) -> &[GramMatrix] {
        &self.grams
    }

    pub fn variant(&self) -> Variant {
        self.variant
    }

    pub fn dim(&self) -> usize {
        self.bases.len()
    }

    /// Cached normalization constant `Z`.
    pub fn normalization(&self) -> f64 {
        self.z
    }

    fn check_point(&self, x: &[f64]) -> Result<()> {
        if x.len() != self.dim() {
            return Err(Error::Shape(format!("point has {} coordinates, model has {}", x.len(), self.dim())));
        }
        Ok(())
    }

    pub(crate) fn local_evals(&self, x: &[f64]) -> Vec<LocalEval> {
        x.iter().zip(&self.bases).map(|(&v, b)| b.eval_local(v)).collect()
    }

    /// `⟨α, Φ(x)⟩`, before squaring or normalization.
    pub fn amplitude(&self, x: &[f64]) -> Result<f64> {
        self.check_point(x)?;
        Ok(self.alpha.contract_local(&self.local_evals(x)))
    }

    pub fn evaluate(&self, x: &[f64]) -> Result<f64> {
        let amp = self.amplitude(x)?;
        Ok(match self.variant {
            Variant::Plain => amp / self.z,
            Variant::Squared => amp * amp / self.z,
        })
    }

    /// `max(q(x), 0)`; only meant for presentation.
    pub fn evaluate_clamped(&self, x: &[f64]) -> Result<f64> {
        Ok(self.evaluate(x)?.max(0.0))
    }

    /// Exact `∫ ⟨α, Φ⟩` (plain) or `∫ ⟨α, Φ⟩²` (squared), ignoring the cached `Z`.
    pub fn partition_function(&self) -> f64 {
        match self.variant {
            Variant::Plain => {
                let ints: Vec<&[f64]> = self.bases.iter().map(BasisSet::integral_vector).collect();
                self.alpha.contract_rank1(&ints).expect("shapes validated at construction")
            }
            Variant::Squared => {
                let applied = self.alpha.apply_gram_operator(&self.grams).expect("shapes validated");
                self.alpha.inner_product(&applied).expect("shapes validated")
            }
        }
    }

    /// Returns a copy with `Z` set to the partition function.
    pub fn normalize(&self) -> Result<Self> {
        let z = self.partition_function();
        if !(z.is_finite() && z > 0.0) {
            return Err(Error::InvalidModel(format!("partition function is not positive ({z})")));
        }
        Ok(Self { z, ..self.clone() })
    }

    /// `vᵀ = Φ(x_1..x_k)` contracted with the first `k` cores (zeros if any
    /// coordinate falls outside its domain).
    pub(crate) fn prefix_vector(&self, prefix: &[f64]) -> Vec<f64> {
        let mut v = vec![1.0];
        for (k, &x) in prefix.iter().enumerate() {
            let ev = self.bases[k].eval_local(x);
            if ev.is_empty() {
                return vec![0.0; self.alpha.core(k).dim().2];
            }
            v = vec_core(&v, self.alpha.core(k), ev.start, ev.values());
        }
        v
    }

    /// Plain right environments: `out[k]` contracts cores `k..d` with the full
    /// basis integrals; `out[d] = [1]`.
    pub(crate) fn plain_right_envs(&self) -> Vec<Vec<f64>> {
        let d = self.dim();
        let mut out = vec![vec![1.0]; d + 1];
        for k in (0..d).rev() {
            let ints = self.bases[k].integral_vector();
            out[k] = core_vec(self.alpha.core(k), 0, ints, &out[k + 1]);
        }
        out
    }

    /// Squared right environments: `out[k][a, b]` contracts cores `k..d` of
    /// `α ⊗ α` with the Gram matrices; `out[d]` is the `1 × 1` identity.
    pub(crate) fn squared_right_envs(&self) -> Vec<Array2<f64>> {
        let d = self.dim();
        let applied = self.alpha.apply_gram_operator(&self.grams).expect("shapes validated");
        let mut out = vec![Array2::ones((1, 1)); d + 1];
        for k in (0..d).rev() {
            out[k] = right_env_step(&out[k + 1], self.alpha.core(k), applied.core(k));
        }
        out
    }

    fn check_prefix(&self, prefix: &[f64], extra: usize) -> Result<()> {
        if prefix.len() + extra > self.dim() {
            return Err(Error::Shape(format!(
                "prefix of length {} is too long for a {}-dimensional model",
                prefix.len(),
                self.dim()
            )));
        }
        Ok(())
    }

    /// Density of the leading coordinates `x_1..x_k` with the rest integrated out.
    pub fn marginal(&self, prefix: &[f64]) -> Result<f64> {
        self.check_prefix(prefix, 0)?;
        let k = prefix.len();
        let v = self.prefix_vector(prefix);
        let val = match self.variant {
            Variant::Plain => {
                let right = self.plain_right_envs();
                dot(&v, &right[k])
            }
            Variant::Squared => {
                let right = self.squared_right_envs();
                quad_form(&right[k], &v)
            }
        };
        Ok(val / self.z)
    }

    /// Joint quantity `q(x_1..x_{k-1}, ξ_k < upper)`, trailing coordinates integrated out.
    pub fn cdf_slice(&self, prefix: &[f64], upper: f64) -> Result<f64> {
        self.check_prefix(prefix, 1)?;
        let k = prefix.len();
        let v = self.prefix_vector(prefix);
        let core = self.alpha.core(k);
        let basis = &self.bases[k];
        let val = match self.variant {
            Variant::Plain => {
                let right = self.plain_right_envs();
                let inner = plain_inner(core, &v, &right[k + 1]);
                basis.partial_integral_dot(&inner, upper)
            }
            Variant::Squared => {
                let right = self.squared_right_envs();
                let inner = SquaredInner::new(core, &v, &right[k + 1]);
                inner.partial(basis, upper)
            }
        };
        Ok(val / self.z)
    }

    /// Marginal density of an arbitrary subset of coordinates.
    pub fn marginal_of(&self, dims: &[usize], values: &[f64]) -> Result<f64> {
        if dims.len() != values.len() {
            return Err(Error::Shape("dims and values differ in length".into()));
        }
        let d = self.dim();
        let mut fixed: Vec<Option<f64>> = vec![None; d];
        for (&k, &x) in dims.iter().zip(values) {
            if k >= d {
                return Err(Error::Shape(format!("dimension {k} out of range for d = {d}")));
            }
            if fixed[k].is_some() {
                return Err(Error::InvalidArgument(format!("dimension {k} repeated")));
            }
            fixed[k] = Some(x);
        }
        let val = match self.variant {
            Variant::Plain => {
                let mut v = vec![1.0];
                for (k, f) in fixed.iter().enumerate() {
                    let core = self.alpha.core(k);
                    v = match f {
                        Some(x) => {
                            let ev = self.bases[k].eval_local(*x);
                            if ev.is_empty() {
                                return Ok(0.0);
                            }
                            vec_core(&v, core, ev.start, ev.values())
                        }
                        None => vec_core(&v, core, 0, self.bases[k].integral_vector()),
                    };
                }
                v[0]
            }
            Variant::Squared => {
                let mut env = Array2::ones((1, 1));
                for (k, f) in fixed.iter().enumerate() {
                    let core = self.alpha.core(k);
                    let other = match f {
                        Some(x) => {
                            let ev = self.bases[k].eval_local(*x);
                            if ev.is_empty() {
                                return Ok(0.0);
                            }
                            let m = self.bases[k].size();
                            let fx = ndarray::Array1::from(ev.to_dense(m));
                            let outer = fx.clone().insert_axis(ndarray::Axis(1)).dot(&fx.insert_axis(ndarray::Axis(0)));
                            crate::tt_core::mode_product(core, &outer)
                        }
                        None => crate::tt_core::mode_product(core, self.grams[k].entries()),
                    };
                    env = crate::tt_core::left_env_step(&env, core, &other);
                }
                env[[0, 0]]
            }
        };
        Ok(val / self.z)
    }

    /// Mean of `log q(x)` over the rows of `data`.
    pub fn log_likelihood(&self, data: ArrayView2<f64>) -> Result<LogLikelihood> {
        if data.ncols() != self.dim() {
            return Err(Error::Shape(format!("data has {} columns, model has {}", data.ncols(), self.dim())));
        }
        let n = data.nrows();
        if n == 0 {
            return Err(Error::Data("no samples".into()));
        }
        let log_z = self.z.ln();
        let mut total = 0.0;
        let mut bad = 0;
        for row in data.rows() {
            let x = row.to_vec();
            let amp = self.alpha.contract_local(&self.local_evals(&x));
            let ll = match self.variant {
                Variant::Plain if amp > 0.0 => amp.ln() - log_z,
                Variant::Squared if amp != 0.0 => 2.0 * amp.abs().ln() - log_z,
                _ => {
                    bad += 1;
                    f64::NEG_INFINITY
                }
            };
            total += ll;
        }
        Ok(LogLikelihood { mean: total / n as f64, n_nonpositive: bad, n })
    }

    pub fn to_file(&self) -> ModelFile {
        ModelFile {
            format: MODEL_FORMAT.to_string(),
            version: 1,
            d: self.dim(),
            variant: self.variant,
            bases: self.bases.iter().map(BasisSet::spec).collect(),
            cores: self
                .alpha
                .cores()
                .iter()
                .map(|c| {
                    c.outer_iter()
                        .map(|slab| slab.outer_iter().map(|row| row.to_vec()).collect())
                        .collect()
                })
                .collect(),
            z: self.z,
        }
    }

    pub fn from_file(file: ModelFile) -> Result<Self> {
        if file.format != MODEL_FORMAT {
            return Err(Error::InvalidModel(format!("unexpected format tag `{}`", file.format)));
        }
        if file.version != 1 {
            return Err(Error::InvalidModel(format!("unsupported model version {}", file.version)));
        }
        if file.d != file.bases.len() || file.d != file.cores.len() {
            return Err(Error::InvalidModel("dimension does not match bases/cores".into()));
        }
        let bases = file.bases.iter().map(BasisSet::from_spec).collect::<Result<Vec<_>>>()?;
        let cores = file
            .cores
            .into_iter()
            .map(|nested| {
                let r0 = nested.len();
                let m = nested.first().map_or(0, Vec::len);
                let r1 = nested.first().and_then(|s| s.first()).map_or(0, Vec::len);
                let flat: Vec<f64> = nested.into_iter().flatten().flatten().collect();
                Array3::from_shape_vec((r0, m, r1), flat).map_err(|e| Error::InvalidModel(format!("ragged core: {e}")))
            })
            .collect::<Result<Vec<_>>>()?;
        let alpha = TTTensor::new(cores)?;
        Self::new(alpha, bases, file.variant)?.with_normalization(file.z)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string(&self.to_file())?)
    }

    pub fn from_json(s: &str) -> Result<Self> {
        Self::from_file(serde_json::from_str(s)?)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_json()?)?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }
}

pub const MODEL_FORMAT: &str = "ttde-model";

/// On-disk model document. Cores are nested `[r_{k-1}][m_k][r_k]` arrays.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelFile {
    pub format: String,
    pub version: u32,
    pub d: usize,
    pub variant: Variant,
    pub bases: Vec<BasisSpec>,
    pub cores: Vec<Vec<Vec<Vec<f64>>>>,
    pub z: f64,
}

pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn quad_form(mat: &Array2<f64>, v: &[f64]) -> f64 {
    let mut acc = 0.0;
    for (i, &vi) in v.iter().enumerate() {
        for (j, &vj) in v.iter().enumerate() {
            acc += vi * mat[[i, j]] * vj;
        }
    }
    acc
}

/// `q[i] = Σ_{a,b} v[a] G[a, i, b] right[b]`, the plain inner environment.
pub(crate) fn plain_inner(core: &Array3<f64>, v: &[f64], right: &[f64]) -> Vec<f64> {
    let (r0, m, r1) = core.dim();
    let data = core.as_slice().expect("standard layout");
    let mut q = vec![0.0; m];
    for (a, &va) in v.iter().enumerate().take(r0) {
        if va == 0.0 {
            continue;
        }
        for (i, qi) in q.iter_mut().enumerate() {
            let row = &data[(a * m + i) * r1..(a * m + i + 1) * r1];
            *qi += va * dot(row, right);
        }
    }
    q
}

/// Squared inner environment for one coordinate, in factored form:
/// `W[i, :] = vᵀ G[:, i, :]` and `RW = W Rᵀ`, so the weight of the pair
/// `(f_i, f_j)` is `W[i, :] · RW[j, :]`.
pub(crate) struct SquaredInner {
    pub(crate) w: Array2<f64>,
    pub(crate) rw: Array2<f64>,
}

impl SquaredInner {
    pub(crate) fn new(core: &Array3<f64>, v: &[f64], right: &Array2<f64>) -> Self {
        let (_, m, r1) = core.dim();
        let mut w = Array2::zeros((m, r1));
        for i in 0..m {
            let slice = core.index_axis(ndarray::Axis(1), i);
            let row = ndarray::ArrayView1::from(v).dot(&slice);
            w.row_mut(i).assign(&row);
        }
        let rw = w.dot(&right.t());
        Self { w, rw }
    }

    fn weight(&self, i: usize, j: usize) -> f64 {
        self.w.row(i).dot(&self.rw.row(j))
    }

    /// `Σ_{ij} Γ(upper)[i, j] · weight(i, j)`.
    pub(crate) fn partial(&self, basis: &BasisSet, upper: f64) -> f64 {
        basis.partial_gram_form(upper, |i, j| self.weight(i, j))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::testing::{dense_amplitude, grid_nodes, random_model, uniform_model};
    use crate::tt_core::testing::{random_tt, rel_err};

    #[test]
    fn uniform_model_is_one_inside() {
        let model = uniform_model(3, 5, 0.0, 1.0, Variant::Plain);
        for x in [[0.1, 0.5, 0.9], [0.0, 0.0, 1.0], [0.33, 0.66, 0.99]] {
            assert!((model.evaluate(&x).unwrap() - 1.0).abs() < 1e-12);
        }
        assert_eq!(model.evaluate(&[0.5, 1.5, 0.5]).unwrap(), 0.0);
        assert!(model.evaluate(&[0.5, 0.5]).is_err());
        assert!((model.partition_function() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn squared_indicator_partition_function() {
        let h = 0.25;
        let bases: Vec<BasisSet> = (0..3).map(|_| BasisSet::new(0, 4, 0.0, 1.0).unwrap()).collect();
        let v = vec![1.0, -2.0, 0.5, 3.0];
        let alpha = TTTensor::rank1_from_vectors(&vec![v.clone(); 3]).unwrap();
        let model = DensityModel::new(alpha, bases, Variant::Squared).unwrap();
        let want = (h * v.iter().map(|x| x * x).sum::<f64>()).powi(3);
        assert!(rel_err(model.partition_function(), want) < 1e-12);
    }

    #[test]
    fn evaluate_matches_dense_expansion() {
        for seed in 0..5 {
            for variant in [Variant::Plain, Variant::Squared] {
                let model = random_model(&[4, 4, 4], &[2, 2], seed, variant);
                let dense = model.alpha().to_dense().unwrap();
                for x in [[0.1, 0.2, 0.3], [-0.5, 0.99, 0.0], [0.7, -0.9, 0.45]] {
                    let amp = dense_amplitude(&model, &dense, &x);
                    let want = if variant == Variant::Plain { amp } else { amp * amp };
                    let got = model.evaluate(&x).unwrap();
                    assert!((got - want).abs() <= 1e-12 * want.abs().max(1.0));
                }
            }
        }
    }

    #[test]
    fn partition_function_matches_grid_quadrature() {
        for seed in 0..3 {
            for variant in [Variant::Plain, Variant::Squared] {
                let model = random_model(&[4, 5, 4], &[2, 3], seed, variant);
                let dense = model.alpha().to_dense().unwrap();
                let grids: Vec<_> = model.bases().iter().map(grid_nodes).collect();
                let mut total = 0.0;
                for (x0, w0) in &grids[0] {
                    for (x1, w1) in &grids[1] {
                        for (x2, w2) in &grids[2] {
                            let amp = dense_amplitude(&model, &dense, &[*x0, *x1, *x2]);
                            let q = if variant == Variant::Plain { amp } else { amp * amp };
                            total += w0 * w1 * w2 * q;
                        }
                    }
                }
                assert!(rel_err(model.partition_function(), total) < 1e-8);
            }
        }
    }

    #[test]
    fn marginal_and_cdf_consistency() {
        let model = random_model(&[5, 4, 4], &[2, 2], 3, Variant::Squared).normalize().unwrap();
        assert!((model.marginal(&[]).unwrap() - 1.0).abs() < 1e-10);
        let x0 = 0.3;
        let m1 = model.marginal(&[x0]).unwrap();
        assert!((model.cdf_slice(&[x0], 1.0).unwrap() - m1).abs() < 1e-12);
        assert!(model.cdf_slice(&[x0], -1.0).unwrap().abs() < 1e-15);
        let mut prev = 0.0;
        for k in 0..=100 {
            let a = -1.0 + 2.0 * k as f64 / 100.0;
            let c = model.cdf_slice(&[x0], a).unwrap();
            assert!(c >= prev - 1e-14);
            prev = c;
        }
        assert!((model.marginal_of(&[0], &[x0]).unwrap() - m1).abs() < 1e-12);
        assert!(model.marginal(&[0.1, 0.2, 0.3, 0.4]).is_err());
        assert!(model.cdf_slice(&[0.1, 0.2, 0.3], 0.0).is_err());
    }

    #[test]
    fn uniform_marginals_and_cdf() {
        let model = uniform_model(2, 6, 0.0, 1.0, Variant::Plain);
        assert!((model.marginal(&[0.4]).unwrap() - 1.0).abs() < 1e-12);
        assert!((model.cdf_slice(&[], 0.5).unwrap() - 0.5).abs() < 1e-12);
        assert_eq!(model.cdf_slice(&[], 0.0).unwrap(), 0.0);
    }

    #[test]
    fn normalize_is_scale_invariant_and_idempotent() {
        let model = random_model(&[4, 4, 4], &[2, 2], 8, Variant::Squared);
        let n1 = model.normalize().unwrap();
        let n2 = n1.normalize().unwrap();
        assert!(rel_err(n2.normalization(), n1.normalization()) < 1e-12);
        let scaled = DensityModel::new(model.alpha().scale(3.0), model.bases().to_vec(), Variant::Squared)
            .unwrap()
            .normalize()
            .unwrap();
        let x = [0.2, -0.3, 0.6];
        assert!(rel_err(scaled.evaluate(&x).unwrap(), n1.evaluate(&x).unwrap()) < 1e-12);
    }

    #[test]
    fn normalize_rejects_negative_mass() {
        let model = uniform_model(2, 4, 0.0, 1.0, Variant::Plain);
        let neg = DensityModel::new(model.alpha().scale(-1.0), model.bases().to_vec(), Variant::Plain).unwrap();
        assert!(matches!(neg.normalize(), Err(Error::InvalidModel(_))));
    }

    #[test]
    fn plain_evaluate_is_additive_in_alpha() {
        let a = random_model(&[4, 4], &[2], 1, Variant::Plain);
        let b = random_tt(&[4, 4], &[3], 2);
        let sum = DensityModel::new(a.alpha().add(&b).unwrap(), a.bases().to_vec(), Variant::Plain).unwrap();
        let bm = DensityModel::new(b, a.bases().to_vec(), Variant::Plain).unwrap();
        for x in [[0.1, 0.2], [-0.7, 0.4]] {
            let want = a.evaluate(&x).unwrap() + bm.evaluate(&x).unwrap();
            assert!((sum.evaluate(&x).unwrap() - want).abs() < 1e-12 * want.abs().max(1.0));
        }
    }

    #[test]
    fn log_likelihood_of_uniform_models() {
        let unit = uniform_model(3, 4, 0.0, 1.0, Variant::Plain);
        let data = ndarray::array![[0.1, 0.2, 0.3], [0.9, 0.5, 0.5]];
        let ll = unit.log_likelihood(data.view()).unwrap();
        assert!(ll.mean.abs() < 1e-12);
        let wide = uniform_model(3, 4, 0.0, 2.0, Variant::Squared).normalize().unwrap();
        let ll = wide.log_likelihood(data.view()).unwrap();
        assert!((ll.mean + 3.0 * 2f64.ln()).abs() < 1e-12);
        let outside = ndarray::array![[0.1, 0.2, 5.0]];
        let ll = unit.log_likelihood(outside.view()).unwrap();
        assert_eq!(ll.n_nonpositive, 1);
        assert_eq!(ll.mean, f64::NEG_INFINITY);
    }

    #[test]
    fn json_round_trip_is_bit_exact() {
        let model = random_model(&[4, 3, 5], &[2, 3], 4, Variant::Squared).normalize().unwrap();
        let json = model.to_json().unwrap();
        let back = DensityModel::from_json(&json).unwrap();
        assert_eq!(back.alpha(), model.alpha());
        assert_eq!(back.normalization().to_bits(), model.normalization().to_bits());
        assert_eq!(back.variant(), model.variant());
        assert_eq!(back.to_json().unwrap(), json);
        assert!(DensityModel::from_json(&json.replace("ttde-model", "other")).is_err());
    }
}
