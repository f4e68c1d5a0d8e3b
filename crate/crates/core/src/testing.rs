//! Oracles shared by unit tests. Deliberately naive: dense tensors and
//! fixed quadrature rules that do not go through the library's integrators.

use ndarray::{ArrayD, IxDyn};

use crate::basis::BasisSet;
use crate::density::{DensityModel, Variant};
use crate::tt_core::testing::random_tt;
use crate::tt_core::TTTensor;

/// All-ones rank-1 coefficients: `⟨α, Φ(x)⟩ = 1` on the domain box.
pub fn uniform_model(d: usize, m: usize, a: f64, b: f64, variant: Variant) -> DensityModel {
    let bases: Vec<BasisSet> = (0..d).map(|_| BasisSet::new(2, m, a, b).unwrap()).collect();
    let alpha = TTTensor::rank1_from_vectors(&vec![vec![1.0; m]; d]).unwrap();
    DensityModel::new(alpha, bases, variant).unwrap()
}

/// Random coefficients over degree-2 bases on `[-1, 1]`.
pub fn random_model(modes: &[usize], inner_ranks: &[usize], seed: u64, variant: Variant) -> DensityModel {
    let bases = modes.iter().map(|&m| BasisSet::new(2, m, -1.0, 1.0).unwrap()).collect();
    DensityModel::new(random_tt(modes, inner_ranks, seed), bases, variant).unwrap()
}

/// `Σ_idx α[idx] Π_k f_{idx_k}(x_k)` by brute force over the dense tensor.
pub fn dense_amplitude(model: &DensityModel, dense: &ArrayD<f64>, x: &[f64]) -> f64 {
    let evals: Vec<Vec<f64>> = model.bases().iter().zip(x).map(|(b, &v)| b.eval_vector(v)).collect();
    dense
        .indexed_iter()
        .map(|(idx, &a)| a * (0..x.len()).map(|k| evals[k][idx_at(&idx, k)]).product::<f64>())
        .sum()
}

fn idx_at(idx: &IxDyn, k: usize) -> usize {
    idx[k]
}

const GL5_NODES: [f64; 5] = [
    -0.906_179_845_938_664,
    -0.538_469_310_105_683,
    0.0,
    0.538_469_310_105_683,
    0.906_179_845_938_664,
];
const GL5_WEIGHTS: [f64; 5] = [
    0.236_926_885_056_189_1,
    0.478_628_670_499_366_5,
    0.568_888_888_888_888_9,
    0.478_628_670_499_366_5,
    0.236_926_885_056_189_1,
];

/// Five-point Gauss rule on every knot interval of `[a, upper]`.
pub fn grid_nodes_to(basis: &BasisSet, upper: f64) -> Vec<(f64, f64)> {
    let (a, b) = basis.domain();
    let upper = upper.min(b);
    let mut pts: Vec<f64> = basis.knots().iter().copied().filter(|&t| t > a && t < upper).collect();
    pts.insert(0, a);
    pts.push(upper);
    pts.dedup();
    let mut out = Vec::new();
    for w in pts.windows(2) {
        let half = 0.5 * (w[1] - w[0]);
        let mid = 0.5 * (w[1] + w[0]);
        for (n, wt) in GL5_NODES.iter().zip(GL5_WEIGHTS) {
            out.push((mid + half * n, wt * half));
        }
    }
    out
}

pub fn grid_nodes(basis: &BasisSet) -> Vec<(f64, f64)> {
    grid_nodes_to(basis, basis.domain().1)
}
