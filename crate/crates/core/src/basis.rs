//! One-dimensional B-spline bases on clamped uniform knots.
//!
//! A [`BasisSet`] owns everything the density model needs from a single
//! coordinate: point evaluation, full and partial integrals of every basis
//! function, and full and partial Gram matrices. All integrals are computed by
//! composite Gauss–Legendre quadrature with `degree + 1` nodes per knot
//! interval, which is exact for the piecewise polynomials involved.

use ndarray::Array2;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::quadrature::gauss_legendre;

/// Largest supported spline degree. Local evaluations are stored inline.
pub const MAX_DEGREE: usize = 7;
const MAX_ORDER: usize = MAX_DEGREE + 1;

/// Values of the basis functions that are nonzero at a point.
///
/// Basis functions `start .. start + len` take the values in `values()`;
/// every other function is zero. An empty evaluation (`len == 0`) means the
/// point lies outside the domain.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LocalEval {
    pub start: usize,
    len: usize,
    buf: [f64; MAX_ORDER],
}

impl LocalEval {
    pub fn empty() -> Self {
        Self { start: 0, len: 0, buf: [0.0; MAX_ORDER] }
    }

    pub fn values(&self) -> &[f64] {
        &self.buf[..self.len]
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    /// Expands into a dense vector of length `m`.
    pub fn to_dense(&self, m: usize) -> Vec<f64> {
        let mut out = vec![0.0; m];
        out[self.start..self.start + self.len].copy_from_slice(self.values());
        out
    }
}

/// Serializable description of a basis; enough to rebuild it exactly.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BasisSpec {
    pub degree: usize,
    pub m: usize,
    pub a: f64,
    pub b: f64,
}

/// Gram matrix `D[i][j] = ∫ f_i f_j` of a basis (or a partial version of it).
#[derive(Debug, Clone, PartialEq)]
pub struct GramMatrix {
    entries: Array2<f64>,
}

impl GramMatrix {
    pub fn new(entries: Array2<f64>) -> Result<Self> {
        if entries.nrows() != entries.ncols() {
            return Err(Error::Shape(format!(
                "gram matrix must be square, got {}x{}",
                entries.nrows(),
                entries.ncols()
            )));
        }
        Ok(Self { entries })
    }

    pub fn identity(m: usize) -> Self {
        Self { entries: Array2::eye(m) }
    }

    pub fn size(&self) -> usize {
        self.entries.nrows()
    }

    pub fn entries(&self) -> &Array2<f64> {
        &self.entries
    }

    pub fn into_inner(self) -> Array2<f64> {
        self.entries
    }
}

/// Degree-`p` B-spline basis with `m` functions on `[a, b]`.
///
/// The knot vector is clamped: `a` and `b` are repeated `p + 1` times and the
/// `m - p - 1` interior knots are uniform, so there are `m - p` knot intervals
/// of equal width and functions `j ..= j + p` are the ones active on interval
/// `j`.
#[derive(Debug, Clone)]
pub struct BasisSet {
    degree: usize,
    m: usize,
    a: f64,
    b: f64,
    width: f64,
    knots: Vec<f64>,
    nodes: Vec<f64>,
    weights: Vec<f64>,
    integrals: Vec<f64>,
    // Per interval, the integrals of its p+1 active functions over the interval.
    interval_integrals: Vec<[f64; MAX_ORDER]>,
    // Per interval, the (p+1)x(p+1) Gram block of its active functions, row-major.
    interval_grams: Vec<Vec<f64>>,
}

impl BasisSet {
    pub fn new(degree: usize, m: usize, a: f64, b: f64) -> Result<Self> {
        if degree > MAX_DEGREE {
            return Err(Error::InvalidArgument(format!(
                "spline degree {degree} exceeds the supported maximum {MAX_DEGREE}"
            )));
        }
        if m < degree + 1 {
            return Err(Error::InvalidArgument(format!(
                "basis size {m} must be at least degree + 1 = {}",
                degree + 1
            )));
        }
        if !(a.is_finite() && b.is_finite() && a < b) {
            return Err(Error::InvalidArgument(format!("invalid basis domain [{a}, {b}]")));
        }
        let n_intervals = m - degree;
        let width = (b - a) / n_intervals as f64;
        let mut knots = Vec::with_capacity(m + degree + 1);
        knots.extend(std::iter::repeat_n(a, degree + 1));
        for j in 1..n_intervals {
            knots.push(a + j as f64 * width);
        }
        knots.extend(std::iter::repeat_n(b, degree + 1));

        let (nodes, weights) = gauss_legendre(degree + 1);
        let mut basis = Self {
            degree,
            m,
            a,
            b,
            width,
            knots,
            nodes,
            weights,
            integrals: vec![0.0; m],
            interval_integrals: Vec::with_capacity(n_intervals),
            interval_grams: Vec::with_capacity(n_intervals),
        };
        let order = degree + 1;
        for j in 0..n_intervals {
            let lo = basis.breakpoint(j);
            let hi = basis.breakpoint(j + 1);
            let mut ints = [0.0; MAX_ORDER];
            let mut gram = vec![0.0; order * order];
            basis.accumulate_interval(j, lo, hi, &mut ints, &mut gram);
            for s in 0..order {
                basis.integrals[j + s] += ints[s];
            }
            basis.interval_integrals.push(ints);
            basis.interval_grams.push(gram);
        }
        Ok(basis)
    }

    pub fn from_spec(spec: &BasisSpec) -> Result<Self> {
        Self::new(spec.degree, spec.m, spec.a, spec.b)
    }

    pub fn spec(&self) -> BasisSpec {
        BasisSpec { degree: self.degree, m: self.m, a: self.a, b: self.b }
    }

    pub fn degree(&self) -> usize {
        self.degree
    }

    /// Number of basis functions.
    pub fn size(&self) -> usize {
        self.m
    }

    pub fn domain(&self) -> (f64, f64) {
        (self.a, self.b)
    }

    pub fn knots(&self) -> &[f64] {
        &self.knots
    }

    pub fn n_intervals(&self) -> usize {
        self.m - self.degree
    }

    pub(crate) fn breakpoint(&self, j: usize) -> f64 {
        if j == self.n_intervals() {
            self.b
        } else {
            self.a + j as f64 * self.width
        }
    }

    /// Index of the knot interval containing `x`; `x == b` maps to the last one.
    pub(crate) fn interval_of(&self, x: f64) -> usize {
        let j = ((x - self.a) / self.width).floor();
        if j < 0.0 {
            0
        } else {
            (j as usize).min(self.n_intervals() - 1)
        }
    }

    pub fn contains(&self, x: f64) -> bool {
        x >= self.a && x <= self.b
    }

    /// Nonzero basis values at `x` (empty outside `[a, b]`).
    pub fn eval_local(&self, x: f64) -> LocalEval {
        if !self.contains(x) {
            return LocalEval::empty();
        }
        self.eval_in_interval(self.interval_of(x), x)
    }

    /// Cox–de Boor triangle for the `p + 1` functions active on interval `j`.
    fn eval_in_interval(&self, j: usize, x: f64) -> LocalEval {
        let p = self.degree;
        let span = j + p;
        let t = &self.knots;
        let mut n = [0.0; MAX_ORDER];
        let mut left = [0.0; MAX_ORDER];
        let mut right = [0.0; MAX_ORDER];
        n[0] = 1.0;
        for q in 1..=p {
            left[q] = x - t[span + 1 - q];
            right[q] = t[span + q] - x;
            let mut saved = 0.0;
            for r in 0..q {
                let denom = right[r + 1] + left[q - r];
                let temp = if denom != 0.0 { n[r] / denom } else { 0.0 };
                n[r] = saved + right[r + 1] * temp;
                saved = left[q - r] * temp;
            }
            n[q] = saved;
        }
        LocalEval { start: j, len: p + 1, buf: n }
    }

    /// `(f_1(x), …, f_m(x))`; all zeros outside the domain.
    pub fn eval_vector(&self, x: f64) -> Vec<f64> {
        self.eval_local(x).to_dense(self.m)
    }

    /// Quadrature of the active functions (and their pairwise products) over
    /// `[lo, hi]`, a sub-interval of knot interval `j`.
    fn accumulate_interval(&self, j: usize, lo: f64, hi: f64, ints: &mut [f64], gram: &mut [f64]) {
        let order = self.degree + 1;
        let half = 0.5 * (hi - lo);
        let mid = 0.5 * (hi + lo);
        for (node, weight) in self.nodes.iter().zip(&self.weights) {
            let x = mid + half * node;
            let w = weight * half;
            let ev = self.eval_in_interval(j, x);
            let vals = ev.values();
            for s in 0..order {
                ints[s] += w * vals[s];
                for t in 0..order {
                    gram[s * order + t] += w * vals[s] * vals[t];
                }
            }
        }
    }

    /// `∫_a^b f_i` for every `i`.
    pub fn integral_vector(&self) -> &[f64] {
        &self.integrals
    }

    /// `∫_{-∞}^{A} f_i` for every `i`.
    pub fn partial_integral_vector(&self, upper: f64) -> Vec<f64> {
        let mut out = vec![0.0; self.m];
        if upper <= self.a {
            return out;
        }
        if upper >= self.b {
            out.copy_from_slice(&self.integrals);
            return out;
        }
        let order = self.degree + 1;
        let last = self.interval_of(upper);
        for j in 0..last {
            for s in 0..order {
                out[j + s] += self.interval_integrals[j][s];
            }
        }
        let mut ints = [0.0; MAX_ORDER];
        let mut scratch = vec![0.0; order * order];
        self.accumulate_interval(last, self.breakpoint(last), upper, &mut ints, &mut scratch);
        for s in 0..order {
            out[last + s] += ints[s];
        }
        out
    }

    /// `Σ_i weights[i] · ∫_{-∞}^{A} f_i` without materializing the vector.
    pub fn partial_integral_dot(&self, weights: &[f64], upper: f64) -> f64 {
        if upper <= self.a {
            return 0.0;
        }
        if upper >= self.b {
            return dot(weights, &self.integrals);
        }
        let order = self.degree + 1;
        let last = self.interval_of(upper);
        let mut acc = 0.0;
        for j in 0..last {
            let ints = &self.interval_integrals[j];
            for s in 0..order {
                acc += weights[j + s] * ints[s];
            }
        }
        let lo = self.breakpoint(last);
        let half = 0.5 * (upper - lo);
        let mid = 0.5 * (upper + lo);
        for (node, weight) in self.nodes.iter().zip(&self.weights) {
            let ev = self.eval_in_interval(last, mid + half * node);
            let w = weight * half;
            for (s, v) in ev.values().iter().enumerate() {
                acc += w * weights[last + s] * v;
            }
        }
        acc
    }

    pub fn gram_matrix(&self) -> GramMatrix {
        self.assemble_gram(self.n_intervals(), None)
    }

    /// `Γ(A)[i][j] = ∫_{-∞}^{A} f_i f_j`.
    pub fn partial_gram_matrix(&self, upper: f64) -> GramMatrix {
        if upper <= self.a {
            return GramMatrix { entries: Array2::zeros((self.m, self.m)) };
        }
        if upper >= self.b {
            return self.gram_matrix();
        }
        let last = self.interval_of(upper);
        self.assemble_gram(last, Some((last, upper)))
    }

    fn assemble_gram(&self, full_intervals: usize, partial: Option<(usize, f64)>) -> GramMatrix {
        let order = self.degree + 1;
        let mut d = Array2::zeros((self.m, self.m));
        for j in 0..full_intervals {
            let block = &self.interval_grams[j];
            for s in 0..order {
                for t in 0..order {
                    d[[j + s, j + t]] += block[s * order + t];
                }
            }
        }
        if let Some((j, upper)) = partial {
            let mut ints = [0.0; MAX_ORDER];
            let mut block = vec![0.0; order * order];
            self.accumulate_interval(j, self.breakpoint(j), upper, &mut ints, &mut block);
            for s in 0..order {
                for t in 0..order {
                    d[[j + s, j + t]] += block[s * order + t];
                }
            }
        }
        GramMatrix { entries: d }
    }

    /// `Σ_{ij} Γ(A)[i][j] · form(i, j)` over the band where `Γ(A)` can be nonzero.
    pub fn partial_gram_form<F>(&self, upper: f64, mut form: F) -> f64
    where
        F: FnMut(usize, usize) -> f64,
    {
        if upper <= self.a {
            return 0.0;
        }
        let order = self.degree + 1;
        let (full, partial) = if upper >= self.b {
            (self.n_intervals(), None)
        } else {
            let last = self.interval_of(upper);
            (last, Some(last))
        };
        let mut acc = 0.0;
        for j in 0..full {
            let block = &self.interval_grams[j];
            for s in 0..order {
                for t in 0..order {
                    acc += block[s * order + t] * form(j + s, j + t);
                }
            }
        }
        if let Some(j) = partial {
            let mut ints = [0.0; MAX_ORDER];
            let mut block = vec![0.0; order * order];
            self.accumulate_interval(j, self.breakpoint(j), upper, &mut ints, &mut block);
            for s in 0..order {
                for t in 0..order {
                    acc += block[s * order + t] * form(j + s, j + t);
                }
            }
        }
        acc
    }
}

impl BasisSet {
    /// `∫ Σ_i w_i f_i` over knot interval `j` alone.
    pub(crate) fn interval_dot(&self, j: usize, weights: &[f64]) -> f64 {
        let ints = &self.interval_integrals[j];
        (0..=self.degree).map(|s| weights[j + s] * ints[s]).sum()
    }

    /// `Σ_{ij} form(i, j) ∫ f_i f_j` over knot interval `j` alone.
    pub(crate) fn interval_form<F: FnMut(usize, usize) -> f64>(&self, j: usize, mut form: F) -> f64 {
        let order = self.degree + 1;
        let block = &self.interval_grams[j];
        let mut acc = 0.0;
        for s in 0..order {
            for t in 0..order {
                acc += block[s * order + t] * form(j + s, j + t);
            }
        }
        acc
    }

    /// Like [`BasisSet::interval_dot`] but integrating only from the left end of interval `j` to `upper`.
    pub(crate) fn partial_interval_dot(&self, j: usize, upper: f64, weights: &[f64]) -> f64 {
        let lo = self.breakpoint(j);
        let half = 0.5 * (upper - lo);
        let mid = 0.5 * (upper + lo);
        let mut acc = 0.0;
        for (node, weight) in self.nodes.iter().zip(&self.weights) {
            let ev = self.eval_in_interval(j, mid + half * node);
            let w = weight * half;
            for (s, v) in ev.values().iter().enumerate() {
                acc += w * weights[j + s] * v;
            }
        }
        acc
    }

    /// Like [`BasisSet::interval_form`] but integrating only up to `upper`.
    /// `weights` is the `(p+1)²` row-major block `form(j + s, j + t)`.
    pub(crate) fn partial_interval_block(&self, j: usize, upper: f64, weights: &[f64]) -> f64 {
        let order = self.degree + 1;
        let lo = self.breakpoint(j);
        let half = 0.5 * (upper - lo);
        let mid = 0.5 * (upper + lo);
        let mut acc = 0.0;
        for (node, weight) in self.nodes.iter().zip(&self.weights) {
            let ev = self.eval_in_interval(j, mid + half * node);
            let vals = ev.values();
            let mut q = 0.0;
            for s in 0..order {
                for t in 0..order {
                    q += vals[s] * weights[s * order + t] * vals[t];
                }
            }
            acc += weight * half * q;
        }
        acc
    }
}

pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

#[cfg(test)]
mod tests {
    use super::*;

    /// Textbook recursive Cox–de Boor, independent of the triangle above.
    fn cox_de_boor(knots: &[f64], i: usize, p: usize, x: f64, last: bool) -> f64 {
        if p == 0 {
            let (lo, hi) = (knots[i], knots[i + 1]);
            return if (lo <= x && x < hi) || (last && x == hi && lo < hi) { 1.0 } else { 0.0 };
        }
        let mut out = 0.0;
        let d1 = knots[i + p] - knots[i];
        if d1 > 0.0 {
            out += (x - knots[i]) / d1 * cox_de_boor(knots, i, p - 1, x, last);
        }
        let d2 = knots[i + p + 1] - knots[i + 1];
        if d2 > 0.0 {
            out += (knots[i + p + 1] - x) / d2 * cox_de_boor(knots, i + 1, p - 1, x, last);
        }
        out
    }

    /// Adaptive Simpson quadrature, used as an oracle for exact integrals.
    fn adaptive_simpson<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64, tol: f64) -> f64 {
        fn rec<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64, fa: f64, fm: f64, fb: f64, whole: f64, tol: f64, depth: u32) -> f64 {
            let m = 0.5 * (a + b);
            let lm = 0.5 * (a + m);
            let rm = 0.5 * (m + b);
            let flm = f(lm);
            let frm = f(rm);
            let left = (m - a) / 6.0 * (fa + 4.0 * flm + fm);
            let right = (b - m) / 6.0 * (fm + 4.0 * frm + fb);
            if depth == 0 || (left + right - whole).abs() <= 15.0 * tol {
                return left + right + (left + right - whole) / 15.0;
            }
            rec(f, a, m, fa, flm, fm, left, tol / 2.0, depth - 1)
                + rec(f, m, b, fm, frm, fb, right, tol / 2.0, depth - 1)
        }
        let fa = f(a);
        let fb = f(b);
        let fm = f(0.5 * (a + b));
        let whole = (b - a) / 6.0 * (fa + 4.0 * fm + fb);
        rec(f, a, b, fa, fm, fb, whole, tol, 40)
    }

    /// Splits at the knots so the integrand is smooth on each piece.
    fn piecewise_quad<F: Fn(f64) -> f64>(basis: &BasisSet, f: F, upper: f64) -> f64 {
        let (a, b) = basis.domain();
        let upper = upper.min(b);
        let mut pts: Vec<f64> = basis.knots().iter().copied().filter(|&t| t > a && t < upper).collect();
        pts.insert(0, a);
        pts.push(upper);
        pts.dedup();
        pts.windows(2).map(|w| adaptive_simpson(&f, w[0], w[1], 1e-15)).sum()
    }

    #[test]
    fn indicator_basis_eval() {
        let basis = BasisSet::new(0, 2, 0.0, 1.0).unwrap();
        assert_eq!(basis.eval_vector(0.25), vec![1.0, 0.0]);
        assert_eq!(basis.eval_vector(0.75), vec![0.0, 1.0]);
        assert_eq!(basis.eval_vector(1.0), vec![0.0, 1.0]);
    }

    #[test]
    fn outside_domain_is_zero() {
        let basis = BasisSet::new(2, 8, 0.0, 1.0).unwrap();
        assert!(basis.eval_vector(-0.01).iter().all(|&v| v == 0.0));
        assert!(basis.eval_vector(1.01).iter().all(|&v| v == 0.0));
    }

    #[test]
    fn eval_matches_recursive_cox_de_boor() {
        let basis = BasisSet::new(2, 8, 0.0, 1.0).unwrap();
        for &x in &[0.0, 0.37, 0.5, 0.999, 1.0, 1.0 / 6.0] {
            let got = basis.eval_vector(x);
            for (i, g) in got.iter().enumerate() {
                let want = cox_de_boor(basis.knots(), i, 2, x, x == 1.0);
                assert!((g - want).abs() < 1e-14, "x={x} i={i}: {g} vs {want}");
            }
        }
    }

    #[test]
    fn partition_of_unity_and_nonnegativity() {
        for &(p, m) in &[(0, 5), (1, 6), (2, 8), (3, 11), (2, 3)] {
            let basis = BasisSet::new(p, m, -2.0, 3.0).unwrap();
            for k in 0..1000 {
                let x = -2.0 + 5.0 * (k as f64 + 0.5) / 1000.0;
                let v = basis.eval_vector(x);
                assert!(v.iter().all(|&f| f >= 0.0));
                assert!((v.iter().sum::<f64>() - 1.0).abs() < 1e-12);
                assert!(v.iter().filter(|&&f| f != 0.0).count() <= p + 1);
            }
        }
    }

    #[test]
    fn integrals_of_indicators_are_widths() {
        let basis = BasisSet::new(0, 4, 0.0, 1.0).unwrap();
        for v in basis.integral_vector() {
            assert!((v - 0.25).abs() < 1e-15);
        }
    }

    #[test]
    fn integrals_match_quadrature_oracle() {
        let basis = BasisSet::new(2, 8, 0.0, 1.0).unwrap();
        let total: f64 = basis.integral_vector().iter().sum();
        assert!((total - 1.0).abs() < 1e-14);
        for i in 0..8 {
            let oracle = piecewise_quad(&basis, |x| cox_de_boor(basis.knots(), i, 2, x, false), 1.0);
            assert!((basis.integral_vector()[i] - oracle).abs() < 1e-10);
        }
        let partial = basis.partial_integral_vector(0.5);
        for i in 0..8 {
            let oracle = piecewise_quad(&basis, |x| cox_de_boor(basis.knots(), i, 2, x, false), 0.5);
            assert!((partial[i] - oracle).abs() < 1e-10);
        }
    }

    #[test]
    fn partial_integral_endpoints() {
        let basis = BasisSet::new(2, 8, -1.0, 2.0).unwrap();
        assert!(basis.partial_integral_vector(-1.0).iter().all(|&v| v == 0.0));
        assert_eq!(basis.partial_integral_vector(2.0), basis.integral_vector());
        assert_eq!(basis.partial_integral_vector(5.0), basis.integral_vector());
    }

    #[test]
    fn partial_integral_derivative_is_basis_value() {
        let basis = BasisSet::new(2, 8, 0.0, 1.0).unwrap();
        let h = 1e-6;
        for k in 1..50 {
            let x = k as f64 / 50.0 + 0.003;
            let up = basis.partial_integral_vector(x + h);
            let dn = basis.partial_integral_vector(x - h);
            let f = basis.eval_vector(x);
            for i in 0..8 {
                assert!(((up[i] - dn[i]) / (2.0 * h) - f[i]).abs() < 1e-5);
            }
        }
    }

    #[test]
    fn partial_integral_is_monotone() {
        let basis = BasisSet::new(2, 10, 0.0, 1.0).unwrap();
        let mut prev = basis.partial_integral_vector(0.0);
        for k in 1..=200 {
            let cur = basis.partial_integral_vector(k as f64 / 200.0);
            assert!(cur.iter().zip(&prev).all(|(c, p)| c + 1e-15 >= *p));
            prev = cur;
        }
    }

    #[test]
    fn partial_integral_dot_matches_vector() {
        let basis = BasisSet::new(2, 9, -1.0, 1.0).unwrap();
        let w: Vec<f64> = (0..9).map(|i| (i as f64 * 0.7).sin()).collect();
        for k in 0..=40 {
            let x = -1.2 + 2.4 * k as f64 / 40.0;
            let v = basis.partial_integral_vector(x);
            assert!((basis.partial_integral_dot(&w, x) - dot(&w, &v)).abs() < 1e-14);
        }
    }

    #[test]
    fn gram_of_indicators_is_scaled_identity() {
        let basis = BasisSet::new(0, 4, 0.0, 2.0).unwrap();
        let d = basis.gram_matrix();
        for i in 0..4 {
            for j in 0..4 {
                let want = if i == j { 0.5 } else { 0.0 };
                assert!((d.entries()[[i, j]] - want).abs() < 1e-15);
            }
        }
    }

    #[test]
    fn gram_matches_quadrature_oracle() {
        let basis = BasisSet::new(2, 8, 0.0, 1.0).unwrap();
        let d = basis.gram_matrix();
        let g = basis.partial_gram_matrix(0.5);
        for i in 0..8 {
            for j in 0..8 {
                let f = |x: f64| cox_de_boor(basis.knots(), i, 2, x, false) * cox_de_boor(basis.knots(), j, 2, x, false);
                assert!((d.entries()[[i, j]] - piecewise_quad(&basis, f, 1.0)).abs() < 1e-12);
                assert!((g.entries()[[i, j]] - piecewise_quad(&basis, f, 0.5)).abs() < 1e-12);
                assert_eq!(d.entries()[[i, j]], d.entries()[[j, i]]);
                if i.abs_diff(j) > 2 {
                    assert_eq!(d.entries()[[i, j]], 0.0);
                }
            }
        }
    }

    #[test]
    fn gram_is_positive_semidefinite() {
        let basis = BasisSet::new(2, 12, 0.0, 3.0).unwrap();
        let d = basis.gram_matrix().into_inner();
        let mat = nalgebra::DMatrix::from_fn(12, 12, |i, j| d[[i, j]]);
        let eig = mat.symmetric_eigenvalues();
        assert!(eig.iter().all(|&e| e >= -1e-12));
    }

    #[test]
    fn partial_gram_endpoints() {
        let basis = BasisSet::new(2, 8, 0.0, 1.0).unwrap();
        assert_eq!(basis.partial_gram_matrix(1.0), basis.gram_matrix());
        assert!(basis.partial_gram_matrix(0.0).entries().iter().all(|&v| v == 0.0));
        let mut prev = basis.partial_gram_matrix(0.0);
        for k in 1..=50 {
            let cur = basis.partial_gram_matrix(k as f64 / 50.0);
            for i in 0..8 {
                assert!(cur.entries()[[i, i]] >= prev.entries()[[i, i]]);
            }
            prev = cur;
        }
    }

    #[test]
    fn partial_gram_form_matches_matrix() {
        let basis = BasisSet::new(2, 7, 0.0, 1.0).unwrap();
        let w = Array2::from_shape_fn((7, 7), |(i, j)| ((i * 7 + j) as f64).cos());
        for &x in &[-0.1, 0.0, 0.13, 0.5, 0.77, 1.0, 1.3] {
            let g = basis.partial_gram_matrix(x);
            let want: f64 = (g.entries() * &w).sum();
            let got = basis.partial_gram_form(x, |i, j| w[[i, j]]);
            assert!((want - got).abs() < 1e-14);
        }
    }

    #[test]
    fn rejects_bad_arguments() {
        assert!(BasisSet::new(2, 2, 0.0, 1.0).is_err());
        assert!(BasisSet::new(2, 5, 1.0, 1.0).is_err());
        assert!(BasisSet::new(9, 20, 0.0, 1.0).is_err());
    }
}
