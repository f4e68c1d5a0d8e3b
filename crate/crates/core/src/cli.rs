//! Command-line front end: `train`, `sample`, `eval` and `grid`.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use ndarray::Array2;
use serde::{Deserialize, Serialize};

use crate::data::{self, CornerMixture, Dataset};
use crate::density::{DensityModel, Variant};
use crate::error::Error;
use crate::metrics;
use crate::sampler;
use crate::training::{self, InitKind, Optimizer, TrainConfig};

/// Noise level of the `toy:two-moons` dataset.
pub const TWO_MOONS_NOISE: f64 = 0.1;
/// Rows generated for toy datasets unless `--n` is given.
pub const DEFAULT_TOY_ROWS: usize = 100_000;
pub const DEFAULT_NEGATIVE_POINTS: usize = 100_000;

#[derive(Debug, Parser)]
#[command(name = "ttde", version, about = "Tensor-train density estimation")]
pub struct Cli {
    /// Worker threads; results do not depend on it.
    #[arg(long, global = true, value_parser = clap::value_parser!(u64).range(1..))]
    pub threads: Option<u64>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Fit a model and write it with its training log.
    Train(TrainArgs),
    /// Draw samples from a model as CSV.
    Sample(SampleArgs),
    /// Compare samples with a reference set and print JSON metrics.
    Eval(EvalArgs),
    /// Tabulate a two-dimensional marginal on a regular grid.
    Grid(GridArgs),
}

/// Training options. Every field may also be set in the `--config` file
/// (`key = value` per line, keys as the long flag names), which takes
/// precedence over the command line.
#[derive(Debug, Clone, Default, Args, Deserialize)]
#[serde(rename_all = "kebab-case", deny_unknown_fields)]
pub struct TrainArgs {
    /// CSV file or `toy:two-moons`, `toy:checkerboard`, `toy:corners`.
    #[arg(long)]
    pub data: Option<String>,
    /// Input CSV has no header row.
    #[arg(long)]
    #[serde(default)]
    pub no_header: bool,
    /// Rows generated for toy data.
    #[arg(long)]
    pub n: Option<usize>,
    /// Extra noise coordinates for `toy:corners`.
    #[arg(long)]
    pub noise_dims: Option<usize>,
    #[arg(long)]
    pub variant: Option<Variant>,
    #[arg(long, value_parser = clap::value_parser!(u64).range(1..))]
    pub rank: Option<u64>,
    #[arg(long)]
    pub basis_size: Option<usize>,
    #[arg(long)]
    pub degree: Option<usize>,
    #[arg(long)]
    pub optimizer: Option<Optimizer>,
    #[arg(long)]
    pub init: Option<InitKind>,
    #[arg(long)]
    pub batch_size: Option<usize>,
    #[arg(long)]
    pub iters: Option<usize>,
    /// Adam learning rate.
    #[arg(long)]
    pub lr: Option<f64>,
    #[arg(long)]
    pub validation_fraction: Option<f64>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub eval_every: Option<usize>,
    /// Write `<out>.ckpt` every this many iterations.
    #[arg(long)]
    pub checkpoint_every: Option<usize>,
    /// Model path (default `model.ttde`).
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Training log CSV (default `<out>.log.csv`).
    #[arg(long)]
    pub log: Option<PathBuf>,
    /// Add a wall-clock column to the log.
    #[arg(long)]
    #[serde(default)]
    pub timing: bool,
    /// Repeat training over values of one setting, e.g. `rank=2,4,8`.
    #[arg(long)]
    pub sweep: Option<String>,
    #[arg(long)]
    #[serde(skip)]
    pub config: Option<PathBuf>,
}

#[derive(Debug, Clone, Args)]
pub struct SampleArgs {
    #[arg(long)]
    pub model: PathBuf,
    #[arg(long)]
    pub n: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Output CSV; stdout when absent.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Metric {
    Stv,
    CrossEntropy,
    NegativeFraction,
}

#[derive(Debug, Clone, Args)]
pub struct EvalArgs {
    /// Held-out samples to compare against.
    #[arg(long)]
    pub reference: PathBuf,
    /// Samples to evaluate; drawn from `--model` when absent.
    #[arg(long)]
    pub samples: Option<PathBuf>,
    #[arg(long)]
    pub model: Option<PathBuf>,
    /// Metrics to report; defaults to `stv` plus the model metrics when a model is given.
    #[arg(long, value_delimiter = ',')]
    pub metrics: Vec<Metric>,
    #[arg(long, default_value_t = metrics::DEFAULT_PROJECTIONS)]
    pub projections: usize,
    /// Seed for projections, model samples and Monte Carlo points.
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Model samples to draw; defaults to the reference size.
    #[arg(long)]
    pub n: Option<usize>,
    #[arg(long, default_value_t = DEFAULT_NEGATIVE_POINTS)]
    pub negative_points: usize,
    /// Input CSVs have no header row.
    #[arg(long)]
    pub no_header: bool,
}

#[derive(Debug, Clone, Args)]
pub struct GridArgs {
    #[arg(long)]
    pub model: PathBuf,
    /// Pair of zero-based dimensions.
    #[arg(long, value_delimiter = ',', default_values_t = [0, 1])]
    pub dims: Vec<usize>,
    /// Cells per axis.
    #[arg(long, default_value_t = 100, value_parser = clap::value_parser!(u64).range(1..))]
    pub resolution: u64,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

/// Metric values printed by `eval`.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub sliced_tv: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub cross_entropy: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub negative_density_fraction: Option<f64>,
}

#[derive(Debug)]
pub enum CliError {
    /// Bad flags or settings; exit code 1.
    Usage(String),
    /// Failure while running; exit code 2.
    Runtime(Error),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) => 1,
            CliError::Runtime(_) => 2,
        }
    }
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CliError::Usage(msg) => write!(f, "usage error: {msg}"),
            CliError::Runtime(e) => write!(f, "{e}"),
        }
    }
}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        match e {
            Error::InvalidArgument(msg) => CliError::Usage(msg),
            other => CliError::Runtime(other),
        }
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Runtime(e.into())
    }
}

type CliResult<T> = std::result::Result<T, CliError>;

fn usage<T>(msg: impl Into<String>) -> CliResult<T> {
    Err(CliError::Usage(msg.into()))
}

/// Parses `args` and runs the command. Returns the process exit code.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    match run(cli) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("ttde: {e}");
            e.exit_code()
        }
    }
}

pub fn run(cli: Cli) -> CliResult<()> {
    let command = cli.command;
    let go = move || match command {
        Command::Train(args) => cmd_train(args),
        Command::Sample(args) => cmd_sample(&args),
        Command::Eval(args) => cmd_eval(&args).and_then(|report| {
            println!("{}", serde_json::to_string(&report).map_err(Error::from)?);
            Ok(())
        }),
        Command::Grid(args) => cmd_grid(&args),
    };
    match cli.threads {
        Some(t) => rayon::ThreadPoolBuilder::new()
            .num_threads(t as usize)
            .build()
            .map_err(|e| CliError::Usage(e.to_string()))?
            .install(go),
        None => go(),
    }
}

macro_rules! overlay {
    ($base:ident, $top:ident; $($field:ident),*) => {
        $( if $top.$field.is_some() { $base.$field = $top.$field.clone(); } )*
    };
}

impl TrainArgs {
    /// Reads a config file; its settings override the ones in `self`.
    pub fn with_config_file(mut self) -> CliResult<Self> {
        let Some(path) = self.config.clone() else {
            return Ok(self);
        };
        let text = std::fs::read_to_string(&path)
            .map_err(|e| CliError::Usage(format!("cannot read config {}: {e}", path.display())))?;
        let file: TrainArgs =
            toml::from_str(&text).map_err(|e| CliError::Usage(format!("config {}: {e}", path.display())))?;
        overlay!(self, file; data, n, noise_dims, variant, rank, basis_size, degree, optimizer, init,
            batch_size, iters, lr, validation_fraction, seed, eval_every, checkpoint_every, out, log, sweep);
        self.no_header |= file.no_header;
        self.timing |= file.timing;
        Ok(self)
    }

    pub fn train_config(&self) -> TrainConfig {
        let d = TrainConfig::default();
        TrainConfig {
            variant: self.variant.unwrap_or(d.variant),
            rank: self.rank.map_or(d.rank, |r| r as usize),
            basis_size: self.basis_size.unwrap_or(d.basis_size),
            degree: self.degree.unwrap_or(d.degree),
            batch_size: self.batch_size.unwrap_or(d.batch_size),
            max_iters: self.iters.unwrap_or(d.max_iters),
            optimizer: self.optimizer.unwrap_or(d.optimizer),
            init: self.init.unwrap_or(d.init),
            learning_rate: self.lr.unwrap_or(d.learning_rate),
            validation_fraction: self.validation_fraction.unwrap_or(d.validation_fraction),
            seed: self.seed.unwrap_or(d.seed),
            eval_every: self.eval_every,
            checkpoint_every: self.checkpoint_every,
        }
    }

    fn out_path(&self) -> PathBuf {
        self.out.clone().unwrap_or_else(|| PathBuf::from("model.ttde"))
    }

    fn log_path(&self) -> PathBuf {
        self.log.clone().unwrap_or_else(|| with_suffix(&self.out_path(), ".log.csv"))
    }
}

fn with_suffix(path: &Path, suffix: &str) -> PathBuf {
    let mut s = path.as_os_str().to_owned();
    s.push(suffix);
    PathBuf::from(s)
}

/// `out.ttde` with tag `rank4` becomes `out-rank4.ttde`.
fn tagged(path: &Path, tag: &str) -> PathBuf {
    let stem = path.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
    let name = match path.extension() {
        Some(ext) => format!("{stem}-{tag}.{}", ext.to_string_lossy()),
        None => format!("{stem}-{tag}"),
    };
    path.with_file_name(name)
}

/// Loads a CSV path or generates a `toy:` dataset.
pub fn load_data(spec: &str, has_header: bool, n: Option<usize>, noise_dims: Option<usize>, seed: u64) -> CliResult<Dataset> {
    let rows = n.unwrap_or(DEFAULT_TOY_ROWS);
    let data = match spec.strip_prefix("toy:") {
        Some("two-moons") => data::gen_two_moons(rows, TWO_MOONS_NOISE, seed)?,
        Some("checkerboard") => data::gen_checkerboard(rows, seed)?,
        Some("corners") => CornerMixture::seven_corners(noise_dims.unwrap_or(0)).generate(rows, seed)?,
        Some(other) => return usage(format!("unknown toy dataset `{other}`")),
        None => {
            let path = Path::new(spec);
            if !path.exists() {
                return Err(CliError::Runtime(Error::Data(format!("data file {} not found", path.display()))));
            }
            let (data, report) = data::load_csv(path, has_header)?;
            if report.rows_rejected > 0 {
                eprintln!("ttde: skipped {} of {} rows with non-finite values", report.rows_rejected, report.rows_read);
            }
            data
        }
    };
    Ok(data)
}

fn apply_sweep(args: &TrainArgs, key: &str, value: &str) -> CliResult<TrainArgs> {
    let mut a = args.clone();
    let bad = || CliError::Usage(format!("bad sweep value `{value}` for `{key}`"));
    match key {
        "rank" => a.rank = Some(value.parse().map_err(|_| bad())?),
        "basis-size" => a.basis_size = Some(value.parse().map_err(|_| bad())?),
        "seed" => a.seed = Some(value.parse().map_err(|_| bad())?),
        "iters" => a.iters = Some(value.parse().map_err(|_| bad())?),
        "batch-size" => a.batch_size = Some(value.parse().map_err(|_| bad())?),
        _ => return usage(format!("cannot sweep over `{key}`")),
    }
    let tag = format!("{key}{value}");
    a.out = Some(tagged(&args.out_path(), &tag));
    a.log = Some(match &args.log {
        Some(log) => tagged(log, &tag),
        None => with_suffix(a.out.as_ref().expect("set above"), ".log.csv"),
    });
    a.sweep = None;
    Ok(a)
}

pub fn cmd_train(args: TrainArgs) -> CliResult<()> {
    let args = args.with_config_file()?;
    if let Some(sweep) = args.sweep.clone() {
        let Some((key, values)) = sweep.split_once('=') else {
            return usage(format!("sweep must look like key=v1,v2, got `{sweep}`"));
        };
        let runs = values
            .split(',')
            .filter(|v| !v.trim().is_empty())
            .map(|v| apply_sweep(&args, key.trim(), v.trim()))
            .collect::<CliResult<Vec<_>>>()?;
        if runs.is_empty() {
            return usage("sweep has no values");
        }
        return runs.into_iter().try_for_each(train_once);
    }
    train_once(args)
}

fn train_once(args: TrainArgs) -> CliResult<()> {
    let Some(spec) = args.data.clone() else {
        return usage("--data is required");
    };
    let config = args.train_config();
    config.validate()?;
    let data = load_data(&spec, !args.no_header, args.n, args.noise_dims, config.seed)?;
    let out = args.out_path();
    let ckpt = with_suffix(&out, ".ckpt");
    let result = training::train_with(&config, &data, |_, model| model.save(&ckpt))?;
    result.model.save(&out)?;
    let log = BufWriter::new(File::create(args.log_path())?);
    result.log.write_csv_columns(log, args.timing)?;
    eprintln!(
        "ttde: wrote {} (best iteration {}, validation loss {})",
        out.display(),
        result.best_iter,
        result.best_val_loss.map_or_else(|| "n/a".into(), |v| v.to_string())
    );
    Ok(())
}

fn output(path: Option<&Path>) -> CliResult<Box<dyn Write>> {
    Ok(match path {
        Some(p) => Box::new(BufWriter::new(File::create(p)?)),
        None => Box::new(BufWriter::new(std::io::stdout().lock())),
    })
}

pub fn cmd_sample(args: &SampleArgs) -> CliResult<()> {
    let model = DensityModel::load(&args.model)?;
    let drawn = sampler::sample(&model, args.n, args.seed)?;
    data::write_csv(output(args.out.as_deref())?, drawn.samples.view())?;
    Ok(())
}

fn read_samples(path: &Path, has_header: bool) -> CliResult<Array2<f64>> {
    let file = File::open(path).map_err(|e| CliError::Runtime(Error::Data(format!("{}: {e}", path.display()))))?;
    Ok(data::read_csv(file, has_header)?.0)
}

/// Computes the `eval` report; the same numbers as the library calls made
/// with the same seed.
pub fn cmd_eval(args: &EvalArgs) -> CliResult<EvalReport> {
    let has_header = !args.no_header;
    let reference = read_samples(&args.reference, has_header)?;
    let model = args.model.as_deref().map(DensityModel::load).transpose()?;
    let metrics: Vec<Metric> = if args.metrics.is_empty() {
        let mut m = vec![Metric::Stv];
        if model.is_some() {
            m.extend([Metric::CrossEntropy, Metric::NegativeFraction]);
        }
        m
    } else {
        args.metrics.clone()
    };
    let need_model = |what: &str| match &model {
        Some(m) => Ok(m),
        None => usage(format!("{what} needs --model")),
    };
    let mut report = EvalReport::default();
    if metrics.contains(&Metric::Stv) {
        let samples = match (&args.samples, &model) {
            (Some(path), _) => read_samples(path, has_header)?,
            (None, Some(m)) => sampler::sample(m, args.n.unwrap_or(reference.nrows()), args.seed)?.samples,
            (None, None) => return usage("stv needs --samples or --model"),
        };
        report.sliced_tv = Some(metrics::sliced_tv(samples.view(), reference.view(), args.projections, args.seed)?);
    }
    if metrics.contains(&Metric::CrossEntropy) {
        report.cross_entropy = Some(metrics::cross_entropy(need_model("cross-entropy")?, reference.view())?.value);
    }
    if metrics.contains(&Metric::NegativeFraction) {
        let m = need_model("negative-fraction")?;
        report.negative_density_fraction = Some(metrics::negative_density_fraction(m, args.negative_points, args.seed)?);
    }
    Ok(report)
}

/// Cell-centre grid over the domain face of `dims` with the marginal
/// density of those two coordinates. Columns `x<i>,x<j>,density`, one-based.
pub fn grid_values(model: &DensityModel, dims: (usize, usize), resolution: usize) -> CliResult<Vec<[f64; 3]>> {
    let d = model.dim();
    let (i, j) = dims;
    if i >= d || j >= d || i == j {
        return usage(format!("grid needs two distinct dimensions below {d}"));
    }
    let axis = |k: usize| -> Vec<f64> {
        let (a, b) = model.bases()[k].domain();
        let h = (b - a) / resolution as f64;
        (0..resolution).map(|c| a + (c as f64 + 0.5) * h).collect()
    };
    let (xs, ys) = (axis(i), axis(j));
    let points: Vec<(f64, f64)> = xs.iter().flat_map(|&x| ys.iter().map(move |&y| (x, y))).collect();
    use rayon::prelude::*;
    let values = points
        .par_iter()
        .map(|&(x, y)| model.marginal_of(&[i, j], &[x, y]).map(|q| [x, y, q]))
        .collect::<crate::error::Result<Vec<_>>>()?;
    Ok(values)
}

pub fn cmd_grid(args: &GridArgs) -> CliResult<()> {
    let model = DensityModel::load(&args.model)?;
    let [i, j] = args.dims[..] else {
        return usage(format!("--dims takes two values, got {}", args.dims.len()));
    };
    let values = grid_values(&model, (i, j), args.resolution as usize)?;
    let mut wtr = csv::Writer::from_writer(output(args.out.as_deref())?);
    wtr.write_record([format!("x{}", i + 1), format!("x{}", j + 1), "density".into()]).map_err(Error::from)?;
    for v in values {
        wtr.write_record(v.iter().map(|x| x.to_string())).map_err(Error::from)?;
    }
    wtr.flush()?;
    Ok(())
}
