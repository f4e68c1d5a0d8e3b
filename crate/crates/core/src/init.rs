//! Starting points for training.

use ndarray::{Array3, ArrayView2};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use rayon::prelude::*;

use crate::basis::BasisSet;
use crate::density::Variant;
use crate::error::{Error, Result};
use crate::linalg::solve_spd;
use crate::tt_core::TTTensor;

/// Per-dimension factors of a rank-1 initialization.
#[derive(Debug, Clone)]
pub struct Rank1Init {
    pub tensor: TTTensor,
    /// One 1D coefficient vector per dimension, before any square root.
    pub factors: Vec<Vec<f64>>,
    /// Dimensions whose Gram solve needed the ridge fallback.
    pub ridged: Vec<usize>,
}

/// Least-squares fit of one marginal: `α = D⁻¹ · mean_i f(x_i)`.
pub fn fit_1d(basis: &BasisSet, values: impl Iterator<Item = f64>) -> Result<(Vec<f64>, bool)> {
    let m = basis.size();
    let mut mean = vec![0.0; m];
    let mut n = 0usize;
    for x in values {
        let ev = basis.eval_local(x);
        for (s, v) in ev.values().iter().enumerate() {
            mean[ev.start + s] += v;
        }
        n += 1;
    }
    if n == 0 {
        return Err(Error::Data("cannot fit a marginal to zero samples".into()));
    }
    mean.iter_mut().for_each(|v| *v /= n as f64);
    solve_spd(basis.gram_matrix().entries(), &mean)
}

/// Rank-1 start `α_1 ⊗ … ⊗ α_d` from independent 1D fits of the marginals.
///
/// For the squared variant each factor is replaced by the square root of its
/// positive part, floored at `1e-3` of the largest entry, so that the squared
/// amplitude approximates the fitted marginal and stays positive on the domain.
pub fn rank1_init(samples: ArrayView2<f64>, bases: &[BasisSet], variant: Variant) -> Result<Rank1Init> {
    if samples.ncols() != bases.len() {
        return Err(Error::Shape(format!("{} columns for {} bases", samples.ncols(), bases.len())));
    }
    if samples.nrows() == 0 {
        return Err(Error::Data("no samples to initialize from".into()));
    }
    let fits: Vec<(Vec<f64>, bool)> = bases
        .par_iter()
        .enumerate()
        .map(|(k, basis)| fit_1d(basis, samples.column(k).iter().copied()))
        .collect::<Result<_>>()?;
    let ridged = fits.iter().enumerate().filter(|(_, f)| f.1).map(|(k, _)| k).collect();
    let factors: Vec<Vec<f64>> = fits.into_iter().map(|f| f.0).collect();
    let vectors: Vec<Vec<f64>> = match variant {
        Variant::Plain => factors.clone(),
        Variant::Squared => factors
            .iter()
            .map(|a| {
                let top = a.iter().copied().fold(0.0, f64::max);
                let floor = if top > 0.0 { 1e-3 * top } else { 1.0 };
                a.iter().map(|&v| v.max(floor).sqrt()).collect()
            })
            .collect(),
    };
    let tensor = TTTensor::rank1_from_vectors(&vectors)?;
    Ok(Rank1Init { tensor, factors, ridged })
}

/// Independent `N(0, 1/(m_k r_k))` entries, `r_k` the right rank of core `k`,
/// so that `E‖T‖² = 1`.
pub fn random_init(modes: &[usize], rank: usize, seed: u64) -> Result<TTTensor> {
    if modes.is_empty() || rank == 0 || modes.contains(&0) {
        return Err(Error::InvalidArgument("random_init needs d ≥ 1, rank ≥ 1 and m ≥ 1".into()));
    }
    let d = modes.len();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut cores = Vec::with_capacity(d);
    for (k, &m) in modes.iter().enumerate() {
        let r0 = if k == 0 { 1 } else { rank };
        let r1 = if k + 1 == d { 1 } else { rank };
        let normal = Normal::new(0.0, 1.0 / ((m * r1) as f64).sqrt()).expect("positive scale");
        let data: Vec<f64> = (0..r0 * m * r1).map(|_| normal.sample(&mut rng)).collect();
        cores.push(Array3::from_shape_vec((r0, m, r1), data).expect("sized"));
    }
    TTTensor::new(cores)
}

/// Embeds `t` into cores of ranks `rank` (where the modes allow it), filling
/// the new entries with `N(0, noise²)` so gradients reach every slot.
pub fn pad_rank(t: &TTTensor, rank: usize, noise: f64, seed: u64) -> Result<TTTensor> {
    let d = t.ndim();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let normal = Normal::new(0.0, noise.abs()).map_err(|e| Error::InvalidArgument(e.to_string()))?;
    let old = t.ranks();
    let mut cores = Vec::with_capacity(d);
    for (k, core) in t.cores().iter().enumerate() {
        let (r0o, m, r1o) = core.dim();
        let r0 = if k == 0 { 1 } else { rank.max(old[k]) };
        let r1 = if k + 1 == d { 1 } else { rank.max(old[k + 1]) };
        let mut out = Array3::from_shape_fn((r0, m, r1), |_| if noise > 0.0 { normal.sample(&mut rng) } else { 0.0 });
        out.slice_mut(ndarray::s![..r0o, .., ..r1o]).assign(core);
        cores.push(out);
    }
    TTTensor::new(cores)
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::Array2;
    use rand::Rng;
    use rand_distr::StandardNormal;

    #[test]
    fn indicator_fit_is_histogram() {
        let basis = BasisSet::new(0, 4, 0.0, 2.0).unwrap();
        let xs = [0.1, 0.2, 0.7, 1.2, 1.3, 1.4, 1.9, 1.95];
        let (alpha, ridged) = fit_1d(&basis, xs.iter().copied()).unwrap();
        assert!(!ridged);
        let h = 0.5;
        let want = [2.0 / 8.0 / h, 1.0 / 8.0 / h, 3.0 / 8.0 / h, 2.0 / 8.0 / h];
        for (a, w) in alpha.iter().zip(&want) {
            assert!((a - w).abs() < 1e-12);
        }
    }

    #[test]
    fn rank1_output_has_unit_ranks() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let samples = Array2::from_shape_fn((500, 3), |_| rng.random::<f64>());
        let bases: Vec<BasisSet> = (0..3).map(|_| BasisSet::new(2, 6, 0.0, 1.0).unwrap()).collect();
        for variant in [Variant::Plain, Variant::Squared] {
            let init = rank1_init(samples.view(), &bases, variant).unwrap();
            assert_eq!(init.tensor.ranks(), vec![1, 1, 1, 1]);
            assert!(init.ridged.is_empty());
        }
    }

    #[test]
    fn fitted_marginals_integrate_to_one() {
        let n = 100_000;
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let xs: Vec<f64> = (0..n).map(|_| rng.sample::<f64, _>(StandardNormal)).collect();
        let (lo, hi) = xs.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), &x| (a.min(x), b.max(x)));
        let basis = BasisSet::new(2, 24, lo - 1e-6, hi + 1e-6).unwrap();
        let (alpha, _) = fit_1d(&basis, xs.iter().copied()).unwrap();
        let mass: f64 = alpha.iter().zip(basis.integral_vector()).map(|(a, i)| a * i).sum();
        assert!((mass - 1.0).abs() < 0.05);
    }

    #[test]
    fn random_init_is_deterministic_and_scaled() {
        assert_eq!(random_init(&[5, 5], 3, 4).unwrap().cores(), random_init(&[5, 5], 3, 4).unwrap().cores());
        let single = random_init(&[7], 1, 0).unwrap();
        assert_eq!(single.core(0).dim(), (1, 7, 1));
        let mut mean_sq = 0.0;
        for seed in 0..100 {
            let t = random_init(&[8, 8, 8, 8], 4, seed).unwrap();
            let norm = t.norm();
            assert!((0.1..10.0).contains(&norm), "norm {norm}");
            mean_sq += norm * norm / 100.0;
        }
        assert!((mean_sq - 1.0).abs() < 0.5);
    }

    #[test]
    fn padding_preserves_tensor_without_noise() {
        let t = random_init(&[4, 5, 3], 2, 1).unwrap();
        let p = pad_rank(&t, 3, 0.0, 0).unwrap();
        assert_eq!(p.ranks(), vec![1, 3, 3, 1]);
        let diff = (p.to_dense().unwrap() - t.to_dense().unwrap()).iter().map(|v| v.abs()).fold(0.0, f64::max);
        assert!(diff < 1e-15);
        let noisy = pad_rank(&t, 3, 1e-3, 0).unwrap();
        assert!(noisy.core(1)[[2, 0, 2]] != 0.0);
    }
}
