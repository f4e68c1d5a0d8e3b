//! Tensor-train container and core algebra.
//!
//! A [`TTTensor`] with cores `G_1 … G_d`, `G_k` of shape `[r_{k-1}, m_k, r_k]`
//! and `r_0 = r_d = 1`, represents the tensor whose `(i_1, …, i_d)` entry is
//! the matrix product `G_1[:, i_1, :] ⋯ G_d[:, i_d, :]`.
//!
//! Contractions run left to right over an accumulated environment so every
//! operation is linear in `d`.

use ndarray::{Array2, Array3, ArrayD, IxDyn};

use crate::basis::{GramMatrix, LocalEval};
use crate::error::{Error, Result};
use crate::linalg::{thin_lq, thin_qr, truncated_svd};

/// Materialization guard for [`TTTensor::to_dense`].
pub const DENSE_LIMIT: usize = 10_000_000;

#[derive(Debug, Clone, PartialEq)]
pub struct TTTensor {
    cores: Vec<Array3<f64>>,
}

impl TTTensor {
    /// Validates the chain of core shapes and stores the cores in standard layout.
    pub fn new(cores: Vec<Array3<f64>>) -> Result<Self> {
        if cores.is_empty() {
            return Err(Error::Shape("a tensor train needs at least one core".into()));
        }
        if cores[0].dim().0 != 1 || cores[cores.len() - 1].dim().2 != 1 {
            return Err(Error::Shape("boundary ranks must be 1".into()));
        }
        for (k, pair) in cores.windows(2).enumerate() {
            if pair[0].dim().2 != pair[1].dim().0 {
                return Err(Error::Shape(format!(
                    "core {k} right rank {} does not match core {} left rank {}",
                    pair[0].dim().2,
                    k + 1,
                    pair[1].dim().0
                )));
            }
        }
        if cores.iter().any(|c| c.dim().1 == 0 || c.dim().0 == 0 || c.dim().2 == 0) {
            return Err(Error::Shape("mode sizes and ranks must be positive".into()));
        }
        let cores = cores.into_iter().map(standard).collect();
        Ok(Self { cores })
    }

    /// All-zero tensor with the given mode sizes and internal ranks (length `d - 1`).
    pub fn zeros(modes: &[usize], inner_ranks: &[usize]) -> Result<Self> {
        if modes.is_empty() || inner_ranks.len() + 1 != modes.len() {
            return Err(Error::Shape("need d modes and d-1 inner ranks".into()));
        }
        let ranks = full_ranks(inner_ranks);
        let cores = modes
            .iter()
            .enumerate()
            .map(|(k, &m)| Array3::zeros((ranks[k], m, ranks[k + 1])))
            .collect();
        Self::new(cores)
    }

    /// Rank-1 tensor `v_1 ⊗ ⋯ ⊗ v_d`.
    pub fn rank1_from_vectors<V: AsRef<[f64]>>(vectors: &[V]) -> Result<Self> {
        if vectors.is_empty() {
            return Err(Error::InvalidArgument("need at least one factor vector".into()));
        }
        let cores = vectors
            .iter()
            .map(|v| {
                let v = v.as_ref();
                Array3::from_shape_vec((1, v.len(), 1), v.to_vec())
                    .map_err(|e| Error::Shape(e.to_string()))
            })
            .collect::<Result<Vec<_>>>()?;
        Self::new(cores)
    }

    pub fn ndim(&self) -> usize {
        self.cores.len()
    }

    pub fn cores(&self) -> &[Array3<f64>] {
        &self.cores
    }

    pub fn core(&self, k: usize) -> &Array3<f64> {
        &self.cores[k]
    }

    pub fn into_cores(self) -> Vec<Array3<f64>> {
        self.cores
    }

    pub fn mode_sizes(&self) -> Vec<usize> {
        self.cores.iter().map(|c| c.dim().1).collect()
    }

    /// `(r_0, r_1, …, r_d)`.
    pub fn ranks(&self) -> Vec<usize> {
        let mut r: Vec<usize> = self.cores.iter().map(|c| c.dim().0).collect();
        r.push(1);
        r
    }

    pub fn max_rank(&self) -> usize {
        self.ranks().into_iter().max().unwrap_or(1)
    }

    pub fn num_params(&self) -> usize {
        self.cores.iter().map(|c| c.len()).sum()
    }

    fn check_same_modes(&self, other: &Self) -> Result<()> {
        if self.mode_sizes() != other.mode_sizes() {
            return Err(Error::Shape(format!(
                "mode sizes differ: {:?} vs {:?}",
                self.mode_sizes(),
                other.mode_sizes()
            )));
        }
        Ok(())
    }

    /// `⟨self, other⟩`, accumulating the `r1 × r2` prefix contraction core by core.
    pub fn inner_product(&self, other: &Self) -> Result<f64> {
        self.check_same_modes(other)?;
        let mut env = Array2::ones((1, 1));
        for (a, b) in self.cores.iter().zip(&other.cores) {
            env = left_env_step(&env, a, b);
        }
        Ok(env[[0, 0]])
    }

    pub fn norm(&self) -> f64 {
        self.inner_product(self).unwrap_or(0.0).max(0.0).sqrt()
    }

    /// `⟨self, v_1 ⊗ ⋯ ⊗ v_d⟩`.
    pub fn contract_rank1<V: AsRef<[f64]>>(&self, vectors: &[V]) -> Result<f64> {
        if vectors.len() != self.ndim() {
            return Err(Error::Shape(format!("expected {} vectors, got {}", self.ndim(), vectors.len())));
        }
        let mut v = vec![1.0];
        for (core, w) in self.cores.iter().zip(vectors) {
            let w = w.as_ref();
            if w.len() != core.dim().1 {
                return Err(Error::Shape(format!("vector of length {} for mode of size {}", w.len(), core.dim().1)));
            }
            v = vec_core(&v, core, 0, w);
        }
        Ok(v[0])
    }

    /// Rank-1 contraction with sparse basis evaluations; an empty evaluation
    /// contributes a zero factor.
    pub fn contract_local(&self, evals: &[LocalEval]) -> f64 {
        debug_assert_eq!(evals.len(), self.ndim());
        let mut v = vec![1.0];
        for (core, ev) in self.cores.iter().zip(evals) {
            if ev.is_empty() {
                return 0.0;
            }
            v = vec_core(&v, core, ev.start, ev.values());
        }
        v[0]
    }

    /// Multiplies every core along its mode axis by the matching Gram matrix.
    pub fn apply_gram_operator(&self, grams: &[GramMatrix]) -> Result<Self> {
        if grams.len() != self.ndim() {
            return Err(Error::Shape(format!("expected {} gram matrices, got {}", self.ndim(), grams.len())));
        }
        let cores = self
            .cores
            .iter()
            .zip(grams)
            .map(|(core, g)| {
                if g.size() != core.dim().1 {
                    return Err(Error::Shape(format!("gram of size {} for mode of size {}", g.size(), core.dim().1)));
                }
                Ok(mode_product(core, g.entries()))
            })
            .collect::<Result<Vec<_>>>()?;
        Self::new(cores)
    }

    pub fn scale(&self, c: f64) -> Self {
        let mut cores = self.cores.clone();
        cores[0].mapv_inplace(|v| v * c);
        Self { cores }
    }

    /// Exact sum as a TT with ranks `r_self + r_other`.
    pub fn add(&self, other: &Self) -> Result<Self> {
        self.check_same_modes(other)?;
        let d = self.ndim();
        if d == 1 {
            let sum = &self.cores[0] + &other.cores[0];
            return Self::new(vec![sum]);
        }
        let mut cores = Vec::with_capacity(d);
        for k in 0..d {
            let (a0, m, a1) = self.cores[k].dim();
            let (b0, _, b1) = other.cores[k].dim();
            let core = if k == 0 {
                let mut c = Array3::zeros((1, m, a1 + b1));
                c.slice_mut(ndarray::s![.., .., ..a1]).assign(&self.cores[k]);
                c.slice_mut(ndarray::s![.., .., a1..]).assign(&other.cores[k]);
                c
            } else if k == d - 1 {
                let mut c = Array3::zeros((a0 + b0, m, 1));
                c.slice_mut(ndarray::s![..a0, .., ..]).assign(&self.cores[k]);
                c.slice_mut(ndarray::s![a0.., .., ..]).assign(&other.cores[k]);
                c
            } else {
                let mut c = Array3::zeros((a0 + b0, m, a1 + b1));
                c.slice_mut(ndarray::s![..a0, .., ..a1]).assign(&self.cores[k]);
                c.slice_mut(ndarray::s![a0.., .., a1..]).assign(&other.cores[k]);
                c
            };
            cores.push(core);
        }
        Self::new(cores)
    }

    /// Left- and right-orthogonal frames plus the center core at every position.
    ///
    /// Three QR sweeps: right-to-left to drop structurally redundant rank,
    /// left-to-right for the left frames, and right-to-left again for the
    /// right frames. The last sweep yields the center cores for free, since
    /// before the `k`-th factorization the train reads `U_{<k} W_k V_{>k}`.
    pub fn left_right_orthogonalize(&self) -> Orthogonalization {
        let d = self.ndim();
        let mut cores = self.cores.clone();
        right_orthogonalize_in_place(&mut cores);

        let mut left = Vec::with_capacity(d);
        let mut carry = cores[0].clone();
        for next in cores.iter().skip(1) {
            let (r0, m, _) = carry.dim();
            let (q, r) = thin_qr(&unfold_left(&carry));
            let rank = q.ncols();
            left.push(fold(q, (r0, m, rank)));
            carry = left_mul(&r, next);
        }
        let last_center = carry;
        {
            let (r0, m, _) = last_center.dim();
            let (q, _) = thin_qr(&unfold_left(&last_center));
            let rank = q.ncols();
            left.push(fold(q, (r0, m, rank)));
        }

        let mut right = vec![Array3::zeros((0, 0, 0)); d];
        let mut center = vec![Array3::zeros((0, 0, 0)); d];
        let mut w = last_center;
        for k in (0..d).rev() {
            let (r0, m, r1) = w.dim();
            let (l, q) = thin_lq(&unfold_right(&w));
            let rank = q.nrows();
            debug_assert!(k == 0 || rank == r0, "rank collapsed during right sweep");
            right[k] = fold(q, (rank, m, r1));
            let next = if k > 0 { Some(right_mul(&left[k - 1], &l)) } else { None };
            center[k] = std::mem::replace(&mut w, next.unwrap_or_else(|| Array3::zeros((0, 0, 0))));
        }
        let ranks = {
            let mut r: Vec<usize> = left.iter().map(|c| c.dim().0).collect();
            r.push(1);
            r
        };
        Orthogonalization { left, right, center, ranks }
    }

    /// TT-rounding to ranks at most `max_rank`: right-orthogonalize, then sweep
    /// left to right truncating each unfolding by SVD.
    pub fn round(&self, max_rank: usize) -> Result<Self> {
        if max_rank == 0 {
            return Err(Error::InvalidArgument("max_rank must be at least 1".into()));
        }
        let d = self.ndim();
        let mut cores = self.cores.clone();
        right_orthogonalize_in_place(&mut cores);
        for k in 0..d.saturating_sub(1) {
            let (r0, m, _) = cores[k].dim();
            let (u, s, vt) = truncated_svd(&unfold_left(&cores[k]), max_rank)?;
            let rank = s.len();
            cores[k] = fold(u, (r0, m, rank));
            let mut svt = vt;
            for (mut row, sv) in svt.rows_mut().into_iter().zip(&s) {
                row *= *sv;
            }
            cores[k + 1] = left_mul(&svt, &cores[k + 1]);
        }
        Self::new(cores)
    }

    /// Dense materialization, for oracles on small tensors only.
    pub fn to_dense(&self) -> Result<ArrayD<f64>> {
        let modes = self.mode_sizes();
        let total: usize = modes.iter().product();
        if total > DENSE_LIMIT {
            return Err(Error::InvalidArgument(format!("dense size {total} exceeds {DENSE_LIMIT}")));
        }
        // Running (prefix index) x (rank) matrix.
        let mut acc = Array2::ones((1, 1));
        for core in &self.cores {
            let (r0, m, r1) = core.dim();
            let prod = acc.dot(&unfold_right(core));
            let rows = acc.nrows();
            acc = reshape2(prod, (rows * m, r1));
            debug_assert_eq!(r0, unfold_right(core).nrows());
        }
        let flat = reshape2(acc, (total, 1)).into_shape_with_order(total).expect("dense size");
        Ok(flat.into_shape_with_order(IxDyn(&modes)).expect("dense shape"))
    }
}

/// Left/right orthogonal frames of a TT tensor.
///
/// For every position `i`, `U_{<i} S_i V_{>i}` reconstructs the tensor, where
/// the `U_k` are left-orthogonal (`Σ_{a,n} U[a,n,i] U[a,n,j] = δ_ij`) and the
/// `V_k` right-orthogonal (`Σ_{n,b} V[i,n,b] V[j,n,b] = δ_ij`).
#[derive(Debug, Clone)]
pub struct Orthogonalization {
    left: Vec<Array3<f64>>,
    right: Vec<Array3<f64>>,
    center: Vec<Array3<f64>>,
    ranks: Vec<usize>,
}

impl Orthogonalization {
    pub fn ndim(&self) -> usize {
        self.left.len()
    }

    pub fn left_core(&self, k: usize) -> &Array3<f64> {
        &self.left[k]
    }

    pub fn right_core(&self, k: usize) -> &Array3<f64> {
        &self.right[k]
    }

    pub fn center_core(&self, k: usize) -> &Array3<f64> {
        &self.center[k]
    }

    pub fn left_cores(&self) -> &[Array3<f64>] {
        &self.left
    }

    pub fn right_cores(&self) -> &[Array3<f64>] {
        &self.right
    }

    /// Ranks of the orthogonal frames, `(1, ρ_1, …, ρ_{d-1}, 1)`.
    pub fn ranks(&self) -> &[usize] {
        &self.ranks
    }

    /// `U_{<i} S_i V_{>i}` as a TT tensor.
    pub fn reconstruct(&self, i: usize) -> TTTensor {
        let mut cores = Vec::with_capacity(self.ndim());
        cores.extend(self.left[..i].iter().cloned());
        cores.push(self.center[i].clone());
        cores.extend(self.right[i + 1..].iter().cloned());
        TTTensor::new(cores).expect("frames have consistent ranks")
    }
}

fn full_ranks(inner: &[usize]) -> Vec<usize> {
    let mut r = Vec::with_capacity(inner.len() + 2);
    r.push(1);
    r.extend_from_slice(inner);
    r.push(1);
    r
}

fn standard(a: Array3<f64>) -> Array3<f64> {
    if a.is_standard_layout() {
        a
    } else {
        a.as_standard_layout().into_owned()
    }
}

/// `[r0, m, r1] → [r0·m, r1]`.
pub(crate) fn unfold_left(core: &Array3<f64>) -> Array2<f64> {
    let (r0, m, r1) = core.dim();
    standard(core.clone()).into_shape_with_order((r0 * m, r1)).expect("contiguous")
}

/// `[r0, m, r1] → [r0, m·r1]`.
pub(crate) fn unfold_right(core: &Array3<f64>) -> Array2<f64> {
    let (r0, m, r1) = core.dim();
    standard(core.clone()).into_shape_with_order((r0, m * r1)).expect("contiguous")
}

pub(crate) fn fold(mat: Array2<f64>, shape: (usize, usize, usize)) -> Array3<f64> {
    let mat = if mat.is_standard_layout() { mat } else { mat.as_standard_layout().into_owned() };
    mat.into_shape_with_order(shape).expect("fold shape")
}

/// Row-major reshape; products of transposed operands may come back column-major.
fn reshape2(mat: Array2<f64>, shape: (usize, usize)) -> Array2<f64> {
    let mat = if mat.is_standard_layout() { mat } else { mat.as_standard_layout().into_owned() };
    mat.into_shape_with_order(shape).expect("reshape size")
}

/// `mat · core` along the left rank axis: `[p, r0] × [r0, m, r1] → [p, m, r1]`.
pub(crate) fn left_mul(mat: &Array2<f64>, core: &Array3<f64>) -> Array3<f64> {
    let (_, m, r1) = core.dim();
    fold(mat.dot(&unfold_right(core)), (mat.nrows(), m, r1))
}

/// `core · mat` along the right rank axis: `[r0, m, r1] × [r1, q] → [r0, m, q]`.
pub(crate) fn right_mul(core: &Array3<f64>, mat: &Array2<f64>) -> Array3<f64> {
    let (r0, m, _) = core.dim();
    fold(unfold_left(core).dot(mat), (r0, m, mat.ncols()))
}

/// `G'[a, i, b] = Σ_j mat[i, j] G[a, j, b]`.
pub(crate) fn mode_product(core: &Array3<f64>, mat: &Array2<f64>) -> Array3<f64> {
    let (r0, _, r1) = core.dim();
    let mut out = Array3::zeros((r0, mat.nrows(), r1));
    for a in 0..r0 {
        let slice = core.index_axis(ndarray::Axis(0), a);
        out.index_axis_mut(ndarray::Axis(0), a).assign(&mat.dot(&slice));
    }
    out
}

/// One step of the pairwise prefix contraction:
/// `env'[j, y] = Σ env[i, x] A[i, n, j] B[x, n, y]`.
pub(crate) fn left_env_step(env: &Array2<f64>, a: &Array3<f64>, b: &Array3<f64>) -> Array2<f64> {
    let (ra, m, _) = a.dim();
    let (_, _, rb1) = b.dim();
    let tmp = env.dot(&unfold_right(b)); // [ra, m·rb1]
    let tmp = reshape2(tmp, (ra * m, rb1));
    unfold_left(a).t().dot(&tmp)
}

/// One step of the pairwise suffix contraction:
/// `env'[i, x] = Σ A[i, n, j] B[x, n, y] env[j, y]`.
pub(crate) fn right_env_step(env: &Array2<f64>, a: &Array3<f64>, b: &Array3<f64>) -> Array2<f64> {
    let (rb0, m, _) = b.dim();
    let c = unfold_left(b).dot(&env.t()); // [rb0·m, ra1]
    let c = reshape2(c, (rb0, m * env.nrows()));
    unfold_right(a).dot(&c.t())
}

/// `out[i, n, j] = Σ left[i, x] core[x, n, y] right[y, j]`.
pub(crate) fn sandwich(left: &Array2<f64>, core: &Array3<f64>, right: &Array2<f64>) -> Array3<f64> {
    right_mul(&left_mul(left, core), right)
}

/// `v' = vᵀ (Σ_s w_s G[:, start + s, :])` for a window of mode weights.
pub(crate) fn vec_core(v: &[f64], core: &Array3<f64>, start: usize, w: &[f64]) -> Vec<f64> {
    let (r0, m, r1) = core.dim();
    debug_assert_eq!(v.len(), r0);
    let data = core.as_slice().expect("standard layout");
    let mut out = vec![0.0; r1];
    for (a, &va) in v.iter().enumerate() {
        if va == 0.0 {
            continue;
        }
        for (s, &ws) in w.iter().enumerate() {
            let c = va * ws;
            if c == 0.0 {
                continue;
            }
            let row = &data[(a * m + start + s) * r1..(a * m + start + s + 1) * r1];
            for (o, g) in out.iter_mut().zip(row) {
                *o += c * g;
            }
        }
    }
    out
}

/// `u' = (Σ_s w_s G[:, start + s, :]) u` for a window of mode weights.
pub(crate) fn core_vec(core: &Array3<f64>, start: usize, w: &[f64], u: &[f64]) -> Vec<f64> {
    let (r0, m, r1) = core.dim();
    debug_assert_eq!(u.len(), r1);
    let data = core.as_slice().expect("standard layout");
    let mut out = vec![0.0; r0];
    for (a, o) in out.iter_mut().enumerate() {
        let mut acc = 0.0;
        for (s, &ws) in w.iter().enumerate() {
            if ws == 0.0 {
                continue;
            }
            let row = &data[(a * m + start + s) * r1..(a * m + start + s + 1) * r1];
            let dotp: f64 = row.iter().zip(u).map(|(g, x)| g * x).sum();
            acc += ws * dotp;
        }
        *o = acc;
    }
    out
}

/// Right-to-left LQ sweep; leaves cores `1..d` right-orthogonal and may shrink
/// ranks that exceed what the trailing modes can support.
fn right_orthogonalize_in_place(cores: &mut [Array3<f64>]) {
    for k in (1..cores.len()).rev() {
        let (_, m, r1) = cores[k].dim();
        let (l, q) = thin_lq(&unfold_right(&cores[k]));
        let rank = q.nrows();
        cores[k] = fold(q, (rank, m, r1));
        cores[k - 1] = right_mul(&cores[k - 1], &l);
    }
}
