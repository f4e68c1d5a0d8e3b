//! Thin wrappers over nalgebra for the few dense factorizations the TT code
//! needs. Matrices cross the boundary as row-major `ndarray` arrays.

use nalgebra::DMatrix;
use ndarray::Array2;

use crate::error::{Error, Result};

pub(crate) fn to_na(a: &Array2<f64>) -> DMatrix<f64> {
    let (r, c) = a.dim();
    match a.as_slice() {
        Some(s) => DMatrix::from_row_slice(r, c, s),
        None => DMatrix::from_fn(r, c, |i, j| a[[i, j]]),
    }
}

pub(crate) fn from_na(m: &DMatrix<f64>) -> Array2<f64> {
    Array2::from_shape_fn((m.nrows(), m.ncols()), |(i, j)| m[(i, j)])
}

/// Thin QR: `a = q r` with `q` having `min(rows, cols)` orthonormal columns.
pub(crate) fn thin_qr(a: &Array2<f64>) -> (Array2<f64>, Array2<f64>) {
    let qr = to_na(a).qr();
    (from_na(&qr.q()), from_na(&qr.r()))
}

/// Thin LQ: `a = l q` with `q` having `min(rows, cols)` orthonormal rows.
pub(crate) fn thin_lq(a: &Array2<f64>) -> (Array2<f64>, Array2<f64>) {
    let (q, r) = thin_qr(&a.t().to_owned());
    (r.t().to_owned(), q.t().to_owned())
}

/// SVD truncated to at most `max_rank` leading singular triplets:
/// returns `(u, s, vt)` with `u · diag(s) · vt` the truncated matrix.
pub(crate) fn truncated_svd(a: &Array2<f64>, max_rank: usize) -> Result<(Array2<f64>, Vec<f64>, Array2<f64>)> {
    let svd = to_na(a)
        .try_svd(true, true, f64::EPSILON, 0)
        .ok_or_else(|| Error::Numeric("SVD did not converge".into()))?;
    let u = svd.u.as_ref().expect("u requested");
    let vt = svd.v_t.as_ref().expect("v_t requested");
    let mut order: Vec<usize> = (0..svd.singular_values.len()).collect();
    order.sort_by(|&i, &j| svd.singular_values[j].total_cmp(&svd.singular_values[i]));
    let keep = max_rank.min(order.len()).max(1);
    let order = &order[..keep];
    let uk = Array2::from_shape_fn((u.nrows(), keep), |(i, k)| u[(i, order[k])]);
    let vk = Array2::from_shape_fn((keep, vt.ncols()), |(k, j)| vt[(order[k], j)]);
    let s = order.iter().map(|&k| svd.singular_values[k]).collect();
    Ok((uk, s, vk))
}

/// Solves `a x = b` for symmetric positive (semi)definite `a`. Falls back to a
/// `1e-10` ridge when Cholesky fails; the flag reports that fallback.
pub(crate) fn solve_spd(a: &Array2<f64>, b: &[f64]) -> Result<(Vec<f64>, bool)> {
    let mat = to_na(a);
    let rhs = nalgebra::DVector::from_column_slice(b);
    if let Some(ch) = mat.clone().cholesky() {
        return Ok((ch.solve(&rhs).iter().copied().collect(), false));
    }
    let n = mat.nrows();
    let ridged = mat + DMatrix::identity(n, n) * 1e-10;
    let ch = ridged
        .cholesky()
        .ok_or_else(|| Error::Numeric("gram matrix is not positive definite even with ridge".into()))?;
    Ok((ch.solve(&rhs).iter().copied().collect(), true))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample(r: usize, c: usize) -> Array2<f64> {
        Array2::from_shape_fn((r, c), |(i, j)| ((i * 31 + j * 17) as f64 * 0.37).sin())
    }

    #[test]
    fn qr_and_lq_reconstruct() {
        for &(r, c) in &[(6, 3), (3, 6), (4, 4)] {
            let a = sample(r, c);
            let (q, rr) = thin_qr(&a);
            assert!((q.dot(&rr) - &a).iter().all(|v| v.abs() < 1e-12));
            let qtq = q.t().dot(&q);
            assert!((qtq - Array2::<f64>::eye(r.min(c))).iter().all(|v| v.abs() < 1e-12));
            let (l, q) = thin_lq(&a);
            assert!((l.dot(&q) - &a).iter().all(|v| v.abs() < 1e-12));
        }
    }

    #[test]
    fn svd_full_rank_reconstructs() {
        let a = sample(7, 4);
        let (u, s, vt) = truncated_svd(&a, 10).unwrap();
        assert!(s.windows(2).all(|w| w[0] >= w[1]));
        let us = &u * &ndarray::Array1::from(s);
        assert!((us.dot(&vt) - &a).iter().all(|v| v.abs() < 1e-12));
    }
}
