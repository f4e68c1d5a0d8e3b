use std::path::Path;
use std::process::{Command, Output};

use ttde::cli::EvalReport;
use ttde::{BasisSet, DensityModel, TTTensor, Variant};

fn ttde(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_ttde")).args(args).output().expect("binary runs")
}

fn ok(args: &[&str]) -> Output {
    let out = ttde(args);
    assert!(out.status.success(), "{args:?} failed: {}", String::from_utf8_lossy(&out.stderr));
    out
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn uniform_model(d: usize, m: usize, a: f64, b: f64) -> DensityModel {
    let bases = (0..d).map(|_| BasisSet::new(2, m, a, b).unwrap()).collect();
    let alpha = TTTensor::rank1_from_vectors(&vec![vec![1.0; m]; d]).unwrap();
    DensityModel::new(alpha, bases, Variant::Plain).unwrap().normalize().unwrap()
}

fn read_rows(path: &Path) -> Vec<Vec<f64>> {
    let mut rdr = csv::Reader::from_path(path).unwrap();
    rdr.records().map(|r| r.unwrap().iter().map(|v| v.parse().unwrap()).collect()).collect()
}

fn train_small(dir: &Path, name: &str, extra: &[&str]) -> std::path::PathBuf {
    let model = dir.join(name);
    let mut args = vec![
        "train", "--data", "toy:two-moons", "--n", "3000", "--rank", "3", "--basis-size", "10", "--iters", "6",
        "--batch-size", "500", "--seed", "4", "--out", s(&model),
    ];
    args.extend_from_slice(extra);
    ok(&args);
    model
}

#[test]
fn two_moons_end_to_end() {
    let dir = tempfile::tempdir().unwrap();
    let model = train_small(dir.path(), "moons.ttde", &["--checkpoint-every", "3"]);
    let loaded = DensityModel::load(&model).unwrap();
    assert_eq!(loaded.dim(), 2);
    assert!((loaded.partition_function() / loaded.normalization() - 1.0).abs() < 1e-10);
    assert!(dir.path().join("moons.ttde.ckpt").exists());
    let log = std::fs::read_to_string(dir.path().join("moons.ttde.log.csv")).unwrap();
    assert!(log.starts_with("iter,train_loss,val_loss\n0,"));
}

#[test]
fn argument_and_runtime_errors_use_distinct_codes() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("m.ttde");
    let missing = ttde(&["train", "--data", "/no/such/data.csv", "--out", s(&out)]);
    assert_eq!(missing.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&missing.stderr).contains("not found"));
    assert_eq!(ttde(&["train", "--data", "toy:two-moons", "--rank", "0"]).status.code(), Some(1));
    assert_eq!(ttde(&["train", "--data", "toy:two-moons", "--variant", "cubed"]).status.code(), Some(1));
    assert_eq!(ttde(&["bogus"]).status.code(), Some(1));
    assert_eq!(ttde(&["--help"]).status.code(), Some(0));
    let squared_riemannian =
        ttde(&["train", "--data", "toy:two-moons", "--variant", "squared", "--optimizer", "riemannian"]);
    assert_eq!(squared_riemannian.status.code(), Some(1));
}

#[test]
fn sample_zero_rows_gives_header() {
    let dir = tempfile::tempdir().unwrap();
    let model = dir.path().join("u.ttde");
    uniform_model(3, 4, 0.0, 1.0).save(&model).unwrap();
    let out = ok(&["sample", "--model", s(&model), "--n", "0"]);
    assert_eq!(String::from_utf8(out.stdout).unwrap(), "x1,x2,x3\n");
}

#[test]
fn resampling_a_reloaded_model_is_reproducible() {
    let dir = tempfile::tempdir().unwrap();
    let model = train_small(dir.path(), "m.ttde", &[]);
    let a = ok(&["sample", "--model", s(&model), "--n", "500", "--seed", "9"]).stdout;
    let b = ok(&["--threads", "1", "sample", "--model", s(&model), "--n", "500", "--seed", "9"]).stdout;
    let c = ok(&["sample", "--model", s(&model), "--n", "500", "--seed", "10"]).stdout;
    assert_eq!(a, b);
    assert_ne!(a, c);
}

#[test]
fn uniform_samples_pass_ks() {
    let dir = tempfile::tempdir().unwrap();
    let model = dir.path().join("u.ttde");
    let csv = dir.path().join("u.csv");
    uniform_model(2, 5, -1.0, 3.0).save(&model).unwrap();
    ok(&["sample", "--model", s(&model), "--n", "20000", "--seed", "3", "--out", s(&csv)]);
    let rows = read_rows(&csv);
    let n = rows.len() as f64;
    // Asymptotic Kolmogorov critical value at level 1e-3.
    let crit = (-(0.5e-3f64).ln() / 2.0).sqrt() / n.sqrt();
    for k in 0..2 {
        let mut v: Vec<f64> = rows.iter().map(|r| (r[k] + 1.0) / 4.0).collect();
        v.sort_by(f64::total_cmp);
        let ks = v
            .iter()
            .enumerate()
            .map(|(i, &u)| (u - i as f64 / n).abs().max(((i + 1) as f64 / n - u).abs()))
            .fold(0.0, f64::max);
        assert!(ks < crit, "dimension {k}: D = {ks}, critical {crit}");
    }
}

#[test]
fn eval_reports_match_library_calls() {
    let dir = tempfile::tempdir().unwrap();
    let model_path = train_small(dir.path(), "m.ttde", &[]);
    let reference = dir.path().join("ref.csv");
    let samples = dir.path().join("x.csv");
    ok(&["sample", "--model", s(&model_path), "--n", "4000", "--seed", "1", "--out", s(&reference)]);
    ok(&["sample", "--model", s(&model_path), "--n", "4000", "--seed", "2", "--out", s(&samples)]);

    let same = ok(&["eval", "--reference", s(&reference), "--samples", s(&reference)]).stdout;
    let same: EvalReport = serde_json::from_slice(&same).unwrap();
    assert!(same.sliced_tv.unwrap() < 0.02);
    assert!(same.cross_entropy.is_none());

    let out = ok(&["eval", "--reference", s(&reference), "--model", s(&model_path), "--seed", "5", "--negative-points", "3000"]);
    let report: EvalReport = serde_json::from_slice(&out.stdout).unwrap();
    let model = DensityModel::load(&model_path).unwrap();
    let (ref_x, _) = ttde::data::load_csv(&reference, true).unwrap();
    let drawn = ttde::sample(&model, 4000, 5).unwrap().samples;
    let stv = ttde::metrics::sliced_tv(drawn.view(), ref_x.samples(), 64, 5).unwrap();
    let ce = ttde::metrics::cross_entropy(&model, ref_x.samples()).unwrap().value;
    let neg = ttde::metrics::negative_density_fraction(&model, 3000, 5).unwrap();
    assert_eq!(report.sliced_tv.unwrap().to_bits(), stv.to_bits());
    assert_eq!(report.cross_entropy.unwrap().to_bits(), ce.to_bits());
    assert_eq!(report.negative_density_fraction.unwrap().to_bits(), neg.to_bits());

    let two = ok(&["eval", "--reference", s(&reference), "--samples", s(&samples), "--metrics", "stv"]).stdout;
    let two: EvalReport = serde_json::from_slice(&two).unwrap();
    let (x, _) = ttde::data::load_csv(&samples, true).unwrap();
    let want = ttde::metrics::sliced_tv(x.samples(), ref_x.samples(), 64, 0).unwrap();
    assert_eq!(two.sliced_tv.unwrap().to_bits(), want.to_bits());

    assert_eq!(ttde(&["eval", "--reference", s(&reference), "--metrics", "kl"]).status.code(), Some(1));
    assert_eq!(ttde(&["eval", "--reference", s(&reference), "--frobnicate"]).status.code(), Some(1));
    assert_eq!(
        ttde(&["eval", "--reference", s(&reference), "--samples", s(&samples), "--metrics", "cross-entropy"]).status.code(),
        Some(1)
    );
}

#[test]
fn grid_integrates_to_face_mass() {
    let dir = tempfile::tempdir().unwrap();
    let model_path = dir.path().join("c.ttde");
    ok(&[
        "train", "--data", "toy:corners", "--n", "4000", "--rank", "2", "--basis-size", "8", "--iters", "4",
        "--seed", "1", "--out", s(&model_path),
    ]);
    let grid = dir.path().join("g.csv");
    ok(&["grid", "--model", s(&model_path), "--dims", "2,0", "--resolution", "60", "--out", s(&grid)]);
    let header = std::fs::read_to_string(&grid).unwrap();
    assert!(header.starts_with("x3,x1,density\n"));
    let rows = read_rows(&grid);
    assert_eq!(rows.len(), 3600);

    let model = DensityModel::load(&model_path).unwrap();
    let (a0, b0) = model.bases()[0].domain();
    let (a2, b2) = model.bases()[2].domain();
    let cell = (b0 - a0) * (b2 - a2) / 3600.0;
    let mass: f64 = rows.iter().map(|r| r[2] * cell).sum();
    assert!((mass - 1.0).abs() < 0.01, "mass {mass}");

    let one = ok(&["grid", "--model", s(&model_path), "--resolution", "1"]).stdout;
    assert_eq!(String::from_utf8(one).unwrap().lines().count(), 2);
    assert_eq!(ttde(&["grid", "--model", s(&model_path), "--dims", "1,1"]).status.code(), Some(1));
}

#[test]
fn uniform_grid_is_constant() {
    let dir = tempfile::tempdir().unwrap();
    let model = dir.path().join("u.ttde");
    uniform_model(2, 6, 0.0, 2.0).save(&model).unwrap();
    let out = ok(&["grid", "--model", s(&model), "--resolution", "7"]).stdout;
    let text = String::from_utf8(out).unwrap();
    for line in text.lines().skip(1) {
        let q: f64 = line.rsplit(',').next().unwrap().parse().unwrap();
        assert!((q - 0.25).abs() < 1e-12);
    }
}

#[test]
fn sweep_and_config_file() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("run.toml");
    std::fs::write(&cfg, "data = \"toy:checkerboard\"\nn = 2000\nbasis-size = 8\niters = 3\n").unwrap();
    let out = dir.path().join("cb.ttde");
    ok(&["train", "--config", s(&cfg), "--basis-size", "20", "--sweep", "rank=1,2", "--out", s(&out)]);
    for r in [1, 2] {
        let m = DensityModel::load(&dir.path().join(format!("cb-rank{r}.ttde"))).unwrap();
        assert_eq!(m.bases()[0].size(), 8);
        assert!(m.alpha().ranks()[1] <= r);
        assert!(dir.path().join(format!("cb-rank{r}.ttde.log.csv")).exists());
    }
}
