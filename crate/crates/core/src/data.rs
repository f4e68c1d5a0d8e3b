//! Datasets: synthetic generators, CSV ingestion and domain bounds.

use std::io::{Read, Write};
use std::path::Path;

use ndarray::{Array2, ArrayView2, Axis};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Relative widening applied to min/max bounds extracted from samples.
pub const BOUNDS_EXPANSION: f64 = 1e-6;

/// Rows generated per independent random stream.
const BLOCK_ROWS: usize = 4096;

#[derive(Debug, Clone)]
pub struct Dataset {
    samples: Array2<f64>,
    bounds: Vec<(f64, f64)>,
    train: Vec<usize>,
    validation: Vec<usize>,
    seed: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetManifest {
    pub n: usize,
    pub d: usize,
    pub bounds: Vec<(f64, f64)>,
    pub seed: u64,
}

impl Dataset {
    /// Wraps an `n × d` sample matrix; bounds come from the samples and every
    /// row is a training row until [`Dataset::split`] is called.
    pub fn new(samples: Array2<f64>, seed: u64) -> Result<Self> {
        if samples.nrows() == 0 || samples.ncols() == 0 {
            return Err(Error::Data("dataset is empty".into()));
        }
        if samples.iter().any(|v| !v.is_finite()) {
            return Err(Error::Data("dataset contains non-finite values".into()));
        }
        let bounds = bounds_from_samples(samples.view());
        let n = samples.nrows();
        Ok(Self { samples, bounds, train: (0..n).collect(), validation: Vec::new(), seed })
    }

    /// Replaces the domain bounds; every sample must lie inside them.
    pub fn with_bounds(mut self, bounds: Vec<(f64, f64)>) -> Result<Self> {
        if bounds.len() != self.dim() {
            return Err(Error::Shape(format!("{} bounds for {} columns", bounds.len(), self.dim())));
        }
        for (k, &(a, b)) in bounds.iter().enumerate() {
            if !(a < b) {
                return Err(Error::InvalidArgument(format!("empty bound [{a}, {b}] for column {k}")));
            }
            let col = self.samples.column(k);
            if col.iter().any(|&v| v < a || v > b) {
                return Err(Error::Data(format!("column {k} has samples outside [{a}, {b}]")));
            }
        }
        self.bounds = bounds;
        Ok(self)
    }

    /// Random train/validation partition with `round(n · fraction)` validation rows.
    pub fn split(mut self, validation_fraction: f64, seed: u64) -> Result<Self> {
        if !(0.0..1.0).contains(&validation_fraction) {
            return Err(Error::InvalidArgument(format!("validation fraction {validation_fraction} not in [0, 1)")));
        }
        let n = self.n();
        let mut idx: Vec<usize> = (0..n).collect();
        idx.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
        let n_val = ((n as f64) * validation_fraction).round() as usize;
        let n_val = n_val.min(n - 1);
        self.validation = idx[..n_val].to_vec();
        self.train = idx[n_val..].to_vec();
        self.validation.sort_unstable();
        self.train.sort_unstable();
        Ok(self)
    }

    pub fn samples(&self) -> ArrayView2<'_, f64> {
        self.samples.view()
    }

    pub fn n(&self) -> usize {
        self.samples.nrows()
    }

    pub fn dim(&self) -> usize {
        self.samples.ncols()
    }

    pub fn bounds(&self) -> &[(f64, f64)] {
        &self.bounds
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn train_indices(&self) -> &[usize] {
        &self.train
    }

    pub fn validation_indices(&self) -> &[usize] {
        &self.validation
    }

    pub fn train_samples(&self) -> Array2<f64> {
        self.samples.select(Axis(0), &self.train)
    }

    pub fn validation_samples(&self) -> Array2<f64> {
        self.samples.select(Axis(0), &self.validation)
    }

    pub fn manifest(&self) -> DatasetManifest {
        DatasetManifest { n: self.n(), d: self.dim(), bounds: self.bounds.clone(), seed: self.seed }
    }
}

/// Per-column `[min, max]` widened by [`BOUNDS_EXPANSION`] of the range.
pub fn bounds_from_samples(samples: ArrayView2<f64>) -> Vec<(f64, f64)> {
    samples
        .columns()
        .into_iter()
        .map(|col| {
            let lo = col.iter().copied().fold(f64::INFINITY, f64::min);
            let hi = col.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            let pad = if hi > lo { BOUNDS_EXPANSION * (hi - lo) } else { BOUNDS_EXPANSION * lo.abs().max(1.0) };
            (lo - pad, hi + pad)
        })
        .collect()
}

/// Fills `n × d` rows block by block; block `i` draws from ChaCha stream `i`,
/// so output does not depend on the thread count.
fn generate_rows<F>(n: usize, d: usize, seed: u64, row_fn: F) -> Array2<f64>
where
    F: Fn(usize, &mut ChaCha8Rng, &mut [f64]) + Sync,
{
    let n_blocks = n.div_ceil(BLOCK_ROWS);
    let blocks: Vec<Vec<f64>> = (0..n_blocks)
        .into_par_iter()
        .map(|block| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(block as u64);
            let rows = BLOCK_ROWS.min(n - block * BLOCK_ROWS);
            let mut buf = vec![0.0; rows * d];
            for (offset, row) in buf.chunks_exact_mut(d).enumerate() {
                row_fn(block * BLOCK_ROWS + offset, &mut rng, row);
            }
            buf
        })
        .collect();
    Array2::from_shape_vec((n, d), blocks.concat()).expect("block sizes add up")
}

/// Two interleaving unit half-circles: the first `⌈n/2⌉` rows lie on
/// `(cos t, sin t)`, the rest on `(1 - cos t, 0.5 - sin t)`, `t ~ U[0, π]`,
/// each coordinate perturbed by `N(0, noise²)`.
pub fn gen_two_moons(n: usize, noise: f64, seed: u64) -> Result<Dataset> {
    let n_outer = n.div_ceil(2);
    let samples = generate_rows(n, 2, seed, |i, rng, row| {
        let t = rng.random::<f64>() * std::f64::consts::PI;
        let (s, c) = t.sin_cos();
        if i < n_outer {
            row[0] = c;
            row[1] = s;
        } else {
            row[0] = 1.0 - c;
            row[1] = 0.5 - s;
        }
        if noise > 0.0 {
            row[0] += noise * rng.sample::<f64, _>(StandardNormal);
            row[1] += noise * rng.sample::<f64, _>(StandardNormal);
        }
    });
    Dataset::new(samples, seed)
}

/// Checkerboard on `[-2, 2]²`: eight of the sixteen unit cells, alternating.
pub fn gen_checkerboard(n: usize, seed: u64) -> Result<Dataset> {
    let samples = generate_rows(n, 2, seed, |_, rng, row| {
        let x = rng.random::<f64>() * 4.0 - 2.0;
        let column = (x + 2.0).floor().clamp(0.0, 3.0) as i64;
        let band = if rng.random::<bool>() { 0.0 } else { -2.0 };
        row[0] = x;
        row[1] = rng.random::<f64>() + band + (column % 2) as f64;
    });
    Dataset::new(samples, seed)
}

/// How cube corners are assigned to mixture components.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CornerLayout {
    /// First `k` corners in binary order (corner `c` has bit `j` of `c` as
    /// coordinate `j`); with `k = 2^dim - 1` this is every corner but the
    /// all-ones one.
    Leading,
    /// `k` distinct corners drawn uniformly with the given seed.
    Random(u64),
}

/// Equal-weight isotropic Gaussians at cube corners, with optional trailing
/// standard-normal noise coordinates.
#[derive(Debug, Clone)]
pub struct CornerMixture {
    centers: Vec<Vec<f64>>,
    sigma: f64,
    noise_dims: usize,
}

impl CornerMixture {
    /// Components at corners of the cube `[0, side]^dim`.
    pub fn new(dim: usize, n_components: usize, noise_dims: usize, sigma: f64, side: f64, layout: CornerLayout) -> Result<Self> {
        if dim == 0 || dim > 30 {
            return Err(Error::InvalidArgument(format!("corner dimension {dim} out of range")));
        }
        let n_corners = 1usize << dim;
        if n_components == 0 || n_components > n_corners {
            return Err(Error::InvalidArgument(format!("{n_components} components for {n_corners} corners")));
        }
        if !(sigma > 0.0) {
            return Err(Error::InvalidArgument("sigma must be positive".into()));
        }
        let ids: Vec<usize> = match layout {
            CornerLayout::Leading => (0..n_components).collect(),
            CornerLayout::Random(seed) => {
                let mut rng = ChaCha8Rng::seed_from_u64(seed);
                rand::seq::index::sample(&mut rng, n_corners, n_components).into_vec()
            }
        };
        let centers = ids
            .into_iter()
            .map(|c| (0..dim).map(|j| if (c >> j) & 1 == 1 { side } else { 0.0 }).collect())
            .collect();
        Ok(Self { centers, sigma, noise_dims })
    }

    /// The seven-of-eight corner mixture with identity covariance on a cube
    /// of side `6σ`, plus `noise_dims` noise coordinates.
    pub fn seven_corners(noise_dims: usize) -> Self {
        Self::new(3, 7, noise_dims, 1.0, 6.0, CornerLayout::Leading).expect("valid layout")
    }

    pub fn dim(&self) -> usize {
        self.centers[0].len() + self.noise_dims
    }

    pub fn centers(&self) -> &[Vec<f64>] {
        &self.centers
    }

    pub fn sigma(&self) -> f64 {
        self.sigma
    }

    pub fn log_density(&self, x: &[f64]) -> f64 {
        let k = self.centers[0].len();
        let log_norm = -0.5 * (2.0 * std::f64::consts::PI).ln();
        let noise: f64 = x[k..].iter().map(|v| log_norm - 0.5 * v * v).sum();
        let comp: Vec<f64> = self
            .centers
            .iter()
            .map(|c| {
                let sq: f64 = c.iter().zip(&x[..k]).map(|(ci, xi)| (xi - ci) * (xi - ci)).sum();
                k as f64 * (log_norm - self.sigma.ln()) - 0.5 * sq / (self.sigma * self.sigma)
            })
            .collect();
        let max = comp.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let lse = max + comp.iter().map(|v| (v - max).exp()).sum::<f64>().ln();
        noise + lse - (self.centers.len() as f64).ln()
    }

    /// Draws `n` rows; also returns the component index of each row.
    pub fn sample_with_labels(&self, n: usize, seed: u64) -> (Array2<f64>, Vec<usize>) {
        let k = self.centers[0].len();
        let d = self.dim();
        let n_comp = self.centers.len();
        // Store the label in an extra column so generation stays row-parallel.
        let raw = generate_rows(n, d + 1, seed, |_, rng, row| {
            let c = rng.random_range(0..n_comp);
            for j in 0..k {
                row[j] = self.centers[c][j] + self.sigma * rng.sample::<f64, _>(StandardNormal);
            }
            for v in row[k..d].iter_mut() {
                *v = rng.sample(StandardNormal);
            }
            row[d] = c as f64;
        });
        let labels = raw.column(d).iter().map(|&v| v as usize).collect();
        let samples = raw.slice(ndarray::s![.., ..d]).to_owned();
        (samples, labels)
    }

    pub fn generate(&self, n: usize, seed: u64) -> Result<Dataset> {
        Dataset::new(self.sample_with_labels(n, seed).0, seed)
    }
}

/// Corner mixture with components of standard deviation `scale` on a cube
/// of side `6 · scale`.
pub fn gen_corner_mixture(
    dim: usize,
    n_components: usize,
    noise_dims: usize,
    scale: f64,
    layout: CornerLayout,
    seed: u64,
    n: usize,
) -> Result<Dataset> {
    CornerMixture::new(dim, n_components, noise_dims, scale, 6.0 * scale, layout)?.generate(n, seed)
}

/// Rows dropped while reading a CSV file.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct CsvReport {
    pub rows_read: usize,
    pub rows_rejected: usize,
}

/// Reads a numeric CSV. Rows containing NaN or infinite values are skipped
/// and counted; anything unparseable is an error.
pub fn read_csv<R: Read>(reader: R, has_header: bool) -> Result<(Array2<f64>, CsvReport)> {
    let mut rdr = csv::ReaderBuilder::new().has_headers(has_header).trim(csv::Trim::All).from_reader(reader);
    let mut flat = Vec::new();
    let mut ncols = None;
    let mut report = CsvReport::default();
    for (line, record) in rdr.records().enumerate() {
        let record = record?;
        if record.iter().all(|f| f.is_empty()) {
            continue;
        }
        report.rows_read += 1;
        let row = record
            .iter()
            .map(|f| f.parse::<f64>().map_err(|e| Error::Data(format!("row {}: cannot parse `{f}`: {e}", line + 1))))
            .collect::<Result<Vec<_>>>()?;
        match ncols {
            None => ncols = Some(row.len()),
            Some(c) if c != row.len() => {
                return Err(Error::Data(format!("row {} has {} columns, expected {c}", line + 1, row.len())))
            }
            _ => {}
        }
        if row.iter().any(|v| !v.is_finite()) {
            report.rows_rejected += 1;
            continue;
        }
        flat.extend(row);
    }
    let ncols = ncols.ok_or_else(|| Error::Data("CSV file has no data rows".into()))?;
    let nrows = flat.len() / ncols;
    if nrows == 0 {
        return Err(Error::Data("CSV file has no finite rows".into()));
    }
    let arr = Array2::from_shape_vec((nrows, ncols), flat).map_err(|e| Error::Data(e.to_string()))?;
    Ok((arr, report))
}

pub fn load_csv(path: &Path, has_header: bool) -> Result<(Dataset, CsvReport)> {
    let file = std::fs::File::open(path)?;
    let (samples, report) = read_csv(file, has_header)?;
    Ok((Dataset::new(samples, 0)?, report))
}

/// Writes rows with header `x1,…,xd`. Values use the shortest decimal form
/// that parses back to the same `f64`.
pub fn write_csv<W: Write>(writer: W, samples: ArrayView2<f64>) -> Result<()> {
    let mut wtr = csv::Writer::from_writer(writer);
    let header: Vec<String> = (1..=samples.ncols()).map(|k| format!("x{k}")).collect();
    wtr.write_record(&header)?;
    for row in samples.rows() {
        wtr.write_record(row.iter().map(|v| v.to_string()))?;
    }
    wtr.flush()?;
    Ok(())
}

pub fn save_csv(path: &Path, samples: ArrayView2<f64>) -> Result<()> {
    let file = std::io::BufWriter::new(std::fs::File::create(path)?);
    write_csv(file, samples)
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    #[test]
    fn two_moons_without_noise_lie_on_arcs() {
        let ds = gen_two_moons(1001, 0.0, 3).unwrap();
        let s = ds.samples();
        for (i, row) in s.rows().into_iter().enumerate() {
            let r = if i < 501 {
                (row[0] * row[0] + row[1] * row[1]).sqrt()
            } else {
                ((row[0] - 1.0).powi(2) + (row[1] - 0.5).powi(2)).sqrt()
            };
            assert!((r - 1.0).abs() < 1e-12);
        }
        let outer = s.rows().into_iter().filter(|r| (r[0] * r[0] + r[1] * r[1] - 1.0).abs() < 1e-12 && r[1] >= 0.0).count();
        assert!(outer >= 501);
    }

    #[test]
    fn two_moons_centroid() {
        let ds = gen_two_moons(1_000_000, 0.0, 11).unwrap();
        let mean = ds.samples().mean_axis(Axis(0)).unwrap();
        // Outer arc centroid (0, 2/π), inner arc centroid (1, 0.5 - 2/π).
        let want = [0.5, 0.5 * (2.0 / PI + 0.5 - 2.0 / PI)];
        assert!((mean[0] - want[0]).abs() < 0.01);
        assert!((mean[1] - want[1]).abs() < 0.01);
    }

    #[test]
    fn generators_are_deterministic() {
        let a = gen_two_moons(10_000, 0.1, 5).unwrap();
        let b = gen_two_moons(10_000, 0.1, 5).unwrap();
        assert_eq!(a.samples(), b.samples());
        let c = gen_two_moons(10_000, 0.1, 6).unwrap();
        assert_ne!(a.samples(), c.samples());
        let pool = rayon::ThreadPoolBuilder::new().num_threads(1).build().unwrap();
        let single = pool.install(|| gen_checkerboard(9_000, 2).unwrap());
        assert_eq!(single.samples(), gen_checkerboard(9_000, 2).unwrap().samples());
    }

    #[test]
    fn checkerboard_support_balance_and_moments() {
        let n = 200_000;
        let ds = gen_checkerboard(n, 1).unwrap();
        let mut cells = [0usize; 16];
        let mut xy = 0.0;
        for row in ds.samples().rows() {
            let (x, y) = (row[0], row[1]);
            assert!((-2.0..=2.0).contains(&x) && (-2.0..=2.0).contains(&y));
            let cx = (x + 2.0).floor().min(3.0) as usize;
            let cy = (y + 2.0).floor().min(3.0) as usize;
            assert_eq!((cx + cy) % 2, 0, "point ({x}, {y}) in an empty cell");
            cells[cx * 4 + cy] += 1;
            xy += x * y;
        }
        let occupied: Vec<usize> = cells.iter().copied().filter(|&c| c > 0).collect();
        assert_eq!(occupied.len(), 8);
        let expected = n as f64 / 8.0;
        let sd = (expected * (1.0 - 1.0 / 8.0)).sqrt();
        assert!(occupied.iter().all(|&c| (c as f64 - expected).abs() < 5.0 * sd));
        let mean = ds.samples().mean_axis(Axis(0)).unwrap();
        assert!(mean[0].abs() < 0.02 && mean[1].abs() < 0.02);
        assert!((xy / n as f64 - 0.25).abs() < 0.02);
    }

    #[test]
    fn single_corner_mean() {
        let sigma = 0.5;
        let n = 40_000;
        let ds = gen_corner_mixture(2, 1, 0, sigma, CornerLayout::Leading, 4, n).unwrap();
        let mean = ds.samples().mean_axis(Axis(0)).unwrap();
        let tol = 3.0 * sigma / (n as f64).sqrt();
        assert!(mean.iter().all(|m| m.abs() < tol));
    }

    #[test]
    fn corner_assignment_is_uniform() {
        let mix = CornerMixture::seven_corners(2);
        assert_eq!(mix.dim(), 5);
        assert!(!mix.centers().contains(&vec![6.0, 6.0, 6.0]));
        let n = 70_000;
        let (_, labels) = mix.sample_with_labels(n, 9);
        let mut counts = [0usize; 7];
        labels.iter().for_each(|&l| counts[l] += 1);
        let p = 1.0 / 7.0;
        let sd = (n as f64 * p * (1.0 - p)).sqrt();
        assert!(counts.iter().all(|&c| (c as f64 - n as f64 * p).abs() < 4.0 * sd));
    }

    #[test]
    fn random_corners_are_distinct() {
        let mix = CornerMixture::new(8, 128, 0, 0.1, 1.0, CornerLayout::Random(3)).unwrap();
        let mut c = mix.centers().to_vec();
        c.sort_by(|a, b| a.partial_cmp(b).unwrap());
        c.dedup();
        assert_eq!(c.len(), 128);
    }

    #[test]
    fn corner_density_integrates_to_one() {
        let mix = CornerMixture::new(2, 3, 0, 0.7, 4.2, CornerLayout::Leading).unwrap();
        let (lo, hi, n) = (-5.0, 9.2, 600);
        let h = (hi - lo) / n as f64;
        let mut total = 0.0;
        for i in 0..n {
            for j in 0..n {
                let x = [lo + (i as f64 + 0.5) * h, lo + (j as f64 + 0.5) * h];
                total += mix.log_density(&x).exp() * h * h;
            }
        }
        assert!((total - 1.0).abs() < 1e-3);
        // Noise coordinates are standard normal.
        let with_noise = CornerMixture::new(2, 3, 1, 0.7, 4.2, CornerLayout::Leading).unwrap();
        let base = mix.log_density(&[0.3, 0.1]);
        let lifted = with_noise.log_density(&[0.3, 0.1, 0.0]);
        assert!((lifted - base + 0.5 * (2.0 * PI).ln()).abs() < 1e-12);
    }

    #[test]
    fn bounds_contain_samples() {
        let ds = gen_two_moons(5000, 0.05, 1).unwrap().split(0.1, 2).unwrap();
        let n_val = ds.validation_indices().len();
        assert_eq!(n_val, 500);
        assert_eq!(ds.train_indices().len() + n_val, 5000);
        let mut all: Vec<usize> = ds.train_indices().iter().chain(ds.validation_indices()).copied().collect();
        all.sort_unstable();
        assert_eq!(all, (0..5000).collect::<Vec<_>>());
        for (k, &(a, b)) in ds.bounds().iter().enumerate() {
            assert!(ds.samples().column(k).iter().all(|&v| v > a && v < b));
        }
    }

    #[test]
    fn csv_round_trip_and_bounds() {
        let samples = ndarray::array![[0.1, -2.5], [1.0 / 3.0, 4.0], [1e-300, 7.25]];
        let mut buf = Vec::new();
        write_csv(&mut buf, samples.view()).unwrap();
        let text = String::from_utf8(buf.clone()).unwrap();
        assert!(text.starts_with("x1,x2\n"));
        let (back, report) = read_csv(&buf[..], true).unwrap();
        assert_eq!(back, samples);
        assert_eq!(report.rows_rejected, 0);
        let ds = Dataset::new(back, 0).unwrap();
        let (a0, b0) = ds.bounds()[0];
        let range = 1.0 / 3.0 - 1e-300;
        assert!((a0 - (1e-300 - 1e-6 * range)).abs() < 1e-18);
        assert!((b0 - (1.0 / 3.0 + 1e-6 * range)).abs() < 1e-18);
        let (a1, b1) = ds.bounds()[1];
        assert!((a1 + 2.5 + 9.75e-6).abs() < 1e-15 && (b1 - 7.25 - 9.75e-6).abs() < 1e-15);
    }

    #[test]
    fn csv_rejects_bad_input() {
        assert!(read_csv(&b""[..], false).is_err());
        assert!(read_csv(&b"x1,x2\n"[..], true).is_err());
        assert!(read_csv(&b"1,2\n3\n"[..], false).is_err());
        assert!(read_csv(&b"1,abc\n"[..], false).is_err());
        let (arr, report) = read_csv(&b"1,2\nNaN,3\n4,inf\n5,6\n"[..], false).unwrap();
        assert_eq!(arr.nrows(), 2);
        assert_eq!(report.rows_rejected, 2);
    }
}
