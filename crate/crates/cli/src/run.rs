use std::path::{Path, PathBuf};
use std::time::Instant;

use anyhow::{Context, Result};
use clap::{ArgMatches, Args, Command, Parser, Subcommand, ValueEnum};

use dtvct::decompose::{alpha_sweep, decompose, DecompParams, GroundTruth};
use dtvct::diffops::DtvParams;
use dtvct::direction::{estimate_direction, estimate_direction_with, DirectionConfig};
use dtvct::fbp::{fbp_reconstruct, FbpConfig, Filter};
use dtvct::io::{self, format_params, MetricRow};
use dtvct::metrics::{crack_capture, crack_signal, psnr};
use dtvct::pdhg::{SolveConfig, SolveReport};
use dtvct::phantom::{add_noise, crack_mask, make_phantom, support_mask, NoiseSpec, PhantomKind, PhantomSpec};
use dtvct::projector::forward_project;
use dtvct::recon::{reconstruct, ReconstructParams, Regularizer};
use dtvct::split::{split_fbp, split_variational, SplitParams, SplitResult, SplitSpec};
use dtvct::{Geometry, Image, Sinogram};

use crate::config::write_manifest;

/// Bad flag combination detected after parsing.
#[derive(Debug, thiserror::Error)]
#[error("{0}")]
pub struct UsageError(String);

fn usage(msg: impl Into<String>) -> anyhow::Error {
    UsageError(msg.into()).into()
}

#[derive(Parser)]
#[command(name = "dtvct", version, about = "Directional TV reconstruction and fibre/crack decomposition for parallel-beam CT")]
pub struct Cli {
    #[command(subcommand)]
    command: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Generate a fibre or fibre-crack phantom
    Phantom(PhantomArgs),
    /// Forward-project an image into a parallel-beam sinogram
    Project(ProjectArgs),
    /// Add relative Gaussian noise to a sinogram
    Noise(NoiseArgs),
    /// Estimate the main direction from sinogram data
    EstimateDirection(DirectionArgs),
    /// Filtered back-projection
    Fbp(FbpArgs),
    /// Variational reconstruction with TV or DTV
    Reconstruct(ReconArgs),
    /// Sinogram splitting into fibre and crack components
    Split(SplitArgs),
    /// Joint DTV decomposition into fibre and crack components
    Decompose(DecomposeArgs),
    /// Decomposition quality over a list of alpha values
    SweepAlpha(SweepAlphaArgs),
    /// Splitting crack capture over a list of range widths
    #[command(name = "sweep-k", alias = "sweep-K")]
    SweepK(SweepKArgs),
    /// Direction-estimation robustness over noise levels
    SweepNoise(SweepNoiseArgs),
}

#[derive(Args, Clone)]
struct Common {
    /// key = value file with option defaults; flags override it
    #[arg(long, value_name = "FILE")]
    config: Option<PathBuf>,
    /// Where to write the run manifest [default: next to the main output]
    #[arg(long, value_name = "FILE")]
    manifest: Option<PathBuf>,
}

#[derive(Args, Clone)]
struct SolverArgs {
    /// Relative objective change at which PDHG stops
    #[arg(long, default_value_t = 1e-5)]
    tol: f64,
    #[arg(long, default_value_t = 5000)]
    max_iters: usize,
    /// Iterations between objective checks
    #[arg(long, default_value_t = 10)]
    check_every: usize,
}

impl SolverArgs {
    fn config(&self) -> SolveConfig {
        SolveConfig { tol: self.tol, max_iters: self.max_iters, check_every: self.check_every, ..SolveConfig::default() }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum Kind {
    Fibre,
    FibreCrack,
}

#[derive(Args, Clone)]
struct PhantomShape {
    #[arg(long, value_enum, default_value = "fibre-crack")]
    kind: Kind,
    #[arg(long, default_value_t = 256)]
    size: usize,
    /// Main fibre direction in degrees, [0, 180)
    #[arg(long, default_value_t = 20.0)]
    angle: f64,
    #[arg(long, default_value_t = 1)]
    seed: u64,
    /// Number of random stripe widths; omit to cover the disk
    #[arg(long)]
    n_stripes: Option<usize>,
    #[arg(long, default_value_t = 12)]
    cracks: usize,
    #[arg(long, default_value_t = 3.0)]
    crack_width: f64,
    /// Subsamples per pixel and axis
    #[arg(long, default_value_t = 4)]
    supersample: usize,
}

impl PhantomShape {
    fn spec(&self) -> PhantomSpec {
        let kind = match self.kind {
            Kind::Fibre => PhantomKind::Fibre,
            Kind::FibreCrack => PhantomKind::FibreCrack,
        };
        PhantomSpec {
            size: self.size,
            kind,
            main_angle_deg: self.angle,
            n_stripes: self.n_stripes,
            crack_count: self.cracks,
            crack_width_px: self.crack_width,
            seed: self.seed,
            supersample: self.supersample,
        }
    }
}

#[derive(Args, Clone)]
struct PhantomArgs {
    #[command(flatten)]
    shape: PhantomShape,
    #[arg(short, long, value_name = "FILE")]
    output: PathBuf,
    /// Also write the crack mask as a 0/1 image
    #[arg(long, value_name = "FILE")]
    mask: Option<PathBuf>,
    /// Also write PGM previews
    #[arg(long)]
    pgm: bool,
    #[command(flatten)]
    common: Common,
}

#[derive(Args, Clone)]
struct ProjectArgs {
    #[arg(short, long, value_name = "FILE")]
    input: PathBuf,
    /// Detector bins [default: image size]
    #[arg(long)]
    bins: Option<usize>,
    #[arg(long, default_value_t = 171)]
    nangles: usize,
    #[arg(short, long, value_name = "FILE")]
    output: PathBuf,
    #[command(flatten)]
    common: Common,
}

#[derive(Args, Clone)]
struct NoiseArgs {
    #[arg(short, long, value_name = "FILE")]
    input: PathBuf,
    /// Noise 2-norm relative to the data 2-norm
    #[arg(long)]
    level: f64,
    #[arg(long, default_value_t = 1)]
    seed: u64,
    #[arg(short, long, value_name = "FILE")]
    output: PathBuf,
    #[command(flatten)]
    common: Common,
}

#[derive(Args, Clone)]
struct DirectionArgs {
    #[arg(short, long, value_name = "FILE")]
    input: PathBuf,
    /// Per-angle scores as CSV
    #[arg(long, value_name = "FILE")]
    scores: Option<PathBuf>,
    /// Include the zero-frequency term in the scores
    #[arg(long)]
    include_dc: bool,
    #[command(flatten)]
    common: Common,
}

#[derive(Args, Clone)]
struct Inputs {
    #[arg(short, long, value_name = "FILE")]
    input: PathBuf,
    /// Reconstruction size [default: number of detector bins]
    #[arg(long)]
    size: Option<usize>,
    /// Ground-truth image for PSNR
    #[arg(long, value_name = "FILE")]
    truth: Option<PathBuf>,
    /// Append a metrics row to this CSV (needs --truth)
    #[arg(long, value_name = "FILE")]
    metrics: Option<PathBuf>,
    /// Also write PGM previews
    #[arg(long)]
    pgm: bool,
}

#[derive(Args, Clone)]
struct FbpArgs {
    #[command(flatten)]
    inputs: Inputs,
    #[arg(long, default_value = "ram-lak")]
    filter: Filter,
    #[arg(long, default_value_t = 2)]
    pad: usize,
    #[arg(short, long, value_name = "FILE")]
    output: PathBuf,
    #[command(flatten)]
    common: Common,
}

#[derive(Clone, Copy, ValueEnum)]
enum Reg {
    Tv,
    Dtv,
}

#[derive(Args, Clone)]
struct ReconArgs {
    #[command(flatten)]
    inputs: Inputs,
    #[arg(long, value_enum)]
    reg: Reg,
    #[arg(long)]
    lambda: f64,
    /// DTV direction in degrees [default: estimated from the data]
    #[arg(long)]
    theta: Option<f64>,
    /// DTV width
    #[arg(long, default_value_t = 0.15)]
    a: f64,
    /// Constrain the image to be nonnegative
    #[arg(long)]
    nonneg: bool,
    #[command(flatten)]
    solver: SolverArgs,
    #[arg(short, long, value_name = "FILE")]
    output: PathBuf,
    #[command(flatten)]
    common: Common,
}

#[derive(Clone, Copy, ValueEnum)]
enum SplitMethod {
    Fbp,
    Variational,
}

#[derive(Args, Clone)]
struct SplitArgs {
    #[command(flatten)]
    inputs: Inputs,
    /// Range width; the fibre part gets K + 1 angles
    #[arg(long = "K", alias = "k", default_value_t = 10)]
    k: usize,
    #[arg(long, value_enum, default_value = "variational")]
    method: SplitMethod,
    /// Main direction in degrees [default: estimated from the data]
    #[arg(long)]
    theta: Option<f64>,
    #[arg(long, default_value_t = 0.001)]
    lambda_u: f64,
    #[arg(long, default_value_t = 0.001)]
    lambda_v: f64,
    #[arg(long, default_value_t = 1e-5)]
    beta: f64,
    #[arg(long, default_value_t = 0.15)]
    a: f64,
    #[arg(long, default_value = "ram-lak")]
    filter: Filter,
    #[command(flatten)]
    solver: SolverArgs,
    #[arg(long, value_name = "FILE")]
    out_u: PathBuf,
    #[arg(long, value_name = "FILE")]
    out_v: PathBuf,
    #[command(flatten)]
    common: Common,
}

#[derive(Args, Clone)]
struct DecompModel {
    #[arg(long, default_value_t = 0.0038)]
    lambda: f64,
    #[arg(long, default_value_t = 0.7)]
    alpha: f64,
    #[arg(long, default_value_t = 1e-4)]
    beta: f64,
    #[arg(long, default_value_t = DecompParams::DEFAULT_A_U)]
    a_u: f64,
    #[arg(long, default_value_t = DecompParams::DEFAULT_A_V)]
    a_v: f64,
    /// Main direction in degrees [default: estimated from the data]
    #[arg(long)]
    theta: Option<f64>,
}

impl DecompModel {
    fn params(&self, theta_deg: f64) -> DecompParams {
        DecompParams {
            lambda: self.lambda,
            alpha: self.alpha,
            a_u: self.a_u,
            a_v: self.a_v,
            beta: self.beta,
            theta_deg,
        }
    }
}

#[derive(Args, Clone)]
struct DecomposeArgs {
    #[command(flatten)]
    inputs: Inputs,
    #[command(flatten)]
    model: DecompModel,
    #[command(flatten)]
    solver: SolverArgs,
    #[arg(long, value_name = "FILE")]
    out_u: PathBuf,
    #[arg(long, value_name = "FILE")]
    out_v: PathBuf,
    #[arg(long, value_name = "FILE")]
    out_sum: PathBuf,
    #[command(flatten)]
    common: Common,
}

/// Synthetic acquisition used by the sweeps.
#[derive(Args, Clone)]
struct Scenario {
    #[command(flatten)]
    shape: PhantomShape,
    #[arg(long, default_value_t = 171)]
    nangles: usize,
    #[arg(long, default_value_t = 0.01)]
    noise: f64,
    #[arg(long, default_value_t = 2)]
    noise_seed: u64,
}

struct ScenarioData {
    spec: PhantomSpec,
    truth: Image,
    noisy: Sinogram,
}

impl Scenario {
    fn build(&self) -> Result<ScenarioData> {
        let spec = self.shape.spec();
        let truth = make_phantom(&spec)?;
        let geom = Geometry::parallel(spec.size, spec.size, self.nangles)?;
        let clean = forward_project(&truth, &geom)?;
        let noisy = add_noise(&clean, &NoiseSpec { level: self.noise, seed: self.noise_seed })?;
        Ok(ScenarioData { spec, truth, noisy })
    }
}

#[derive(Args, Clone)]
struct SweepAlphaArgs {
    #[command(flatten)]
    scenario: Scenario,
    #[command(flatten)]
    model: DecompModel,
    #[arg(long, value_delimiter = ',', default_value = "0.3,0.7,1.5")]
    alphas: Vec<f64>,
    #[command(flatten)]
    solver: SolverArgs,
    #[arg(short, long, value_name = "FILE")]
    output: PathBuf,
    #[command(flatten)]
    common: Common,
}

#[derive(Args, Clone)]
struct SweepKArgs {
    #[command(flatten)]
    scenario: Scenario,
    #[arg(long, value_delimiter = ',', default_value = "2,10,40")]
    ks: Vec<usize>,
    #[arg(long, value_enum, default_value = "variational")]
    method: SplitMethod,
    #[arg(long, default_value_t = 0.001)]
    lambda_u: f64,
    #[arg(long, default_value_t = 0.001)]
    lambda_v: f64,
    #[arg(long, default_value_t = 1e-5)]
    beta: f64,
    #[arg(long, default_value_t = 0.15)]
    a: f64,
    #[command(flatten)]
    solver: SolverArgs,
    #[arg(short, long, value_name = "FILE")]
    output: PathBuf,
    #[command(flatten)]
    common: Common,
}

#[derive(Args, Clone)]
struct SweepNoiseArgs {
    #[command(flatten)]
    shape: PhantomShape,
    #[arg(long, default_value_t = 171)]
    nangles: usize,
    #[arg(long, value_delimiter = ',', default_value = "0,0.01,0.03,0.05,0.1,0.2,0.3,0.4")]
    levels: Vec<f64>,
    /// Noise realisations per level
    #[arg(long, default_value_t = 20)]
    runs: u64,
    #[arg(long, default_value_t = 1000)]
    noise_seed: u64,
    #[arg(short, long, value_name = "FILE")]
    output: PathBuf,
    #[command(flatten)]
    common: Common,
}

fn manifest_path(common: &Common, main_output: &Path) -> PathBuf {
    common.manifest.clone().unwrap_or_else(|| {
        let mut p = main_output.as_os_str().to_owned();
        p.push(".manifest");
        PathBuf::from(p)
    })
}

fn save_image(path: &Path, img: &Image, pgm: bool) -> Result<()> {
    io::write_image(path, img).with_context(|| format!("writing {}", path.display()))?;
    if pgm {
        io::write_pgm(path.with_extension("pgm"), img)?;
    }
    Ok(())
}

fn load_sinogram(inputs: &Inputs) -> Result<Sinogram> {
    io::read_sinogram(&inputs.input, inputs.size).with_context(|| format!("reading {}", inputs.input.display()))
}

fn load_truth(inputs: &Inputs) -> Result<Option<Image>> {
    if inputs.metrics.is_some() && inputs.truth.is_none() {
        return Err(usage("--metrics needs --truth"));
    }
    inputs
        .truth
        .as_ref()
        .map(|p| io::read_image(p).with_context(|| format!("reading {}", p.display())))
        .transpose()
}

/// Appends `row` to the metrics file, writing the header for a new file.
fn append_metric(path: &Path, row: &MetricRow) -> Result<()> {
    let mut rows = if path.exists() { io::read_metrics_from(std::fs::File::open(path)?)? } else { Vec::new() };
    rows.push(row.clone());
    io::write_metrics(path, &rows)?;
    Ok(())
}

fn report_metrics(inputs: &Inputs, truth: Option<&Image>, result: &Image, mut row: MetricRow) -> Result<()> {
    if let Some(t) = truth {
        row.psnr_db = psnr(result, t)?;
        println!("psnr_db = {:.4}", row.psnr_db);
    }
    if let Some(path) = &inputs.metrics {
        append_metric(path, &row)?;
    }
    Ok(())
}

fn warn_unconverged(what: &str, report: &SolveReport) {
    if !report.converged {
        eprintln!(
            "warning: {what} stopped after {} iterations with relative change {:.3e}",
            report.iterations, report.rel_change
        );
    }
}

/// `theta` if given, otherwise the estimated main direction.
fn main_direction(sin: &Sinogram, theta: Option<f64>) -> Result<f64> {
    match theta {
        Some(t) => Ok(t),
        None => {
            let est = estimate_direction(sin)?;
            println!("estimated main direction = {} deg", est.theta_deg);
            Ok(est.theta_deg)
        }
    }
}

fn main_index(sin: &Sinogram, theta: Option<f64>) -> Result<usize> {
    let t = main_direction(sin, theta)?;
    Ok(sin.geometry().nearest_angle_index(t).expect("sinogram has angles"))
}

fn split_row(method: &str, k: usize, res: &SplitResult, secs: f64) -> MetricRow {
    MetricRow {
        method: method.into(),
        params: format_params(&[("K", k.to_string())]),
        psnr_db: f64::NAN,
        iterations: res.reports.as_ref().map_or(0, |(a, b)| a.iterations + b.iterations),
        wall_seconds: secs,
    }
}

pub fn execute(cli: Cli, sub: &Command, matches: &ArgMatches) -> Result<()> {
    match cli.command {
        Cmd::Phantom(a) => {
            let spec = a.shape.spec();
            let img = make_phantom(&spec)?;
            save_image(&a.output, &img, a.pgm)?;
            if let Some(path) = &a.mask {
                let mask = crack_mask(&spec);
                let m = Image::from_data(spec.size, mask.iter().map(|&c| f64::from(u8::from(c))).collect())?;
                save_image(path, &m, a.pgm)?;
            }
            write_manifest(&manifest_path(&a.common, &a.output), sub, matches)
        }
        Cmd::Project(a) => {
            let img = io::read_image(&a.input).with_context(|| format!("reading {}", a.input.display()))?;
            let geom = Geometry::parallel(img.size(), a.bins.unwrap_or(img.size()), a.nangles)?;
            io::write_sinogram(&a.output, &forward_project(&img, &geom)?)?;
            write_manifest(&manifest_path(&a.common, &a.output), sub, matches)
        }
        Cmd::Noise(a) => {
            let sin = io::read_sinogram(&a.input, None).with_context(|| format!("reading {}", a.input.display()))?;
            io::write_sinogram(&a.output, &add_noise(&sin, &NoiseSpec { level: a.level, seed: a.seed })?)?;
            write_manifest(&manifest_path(&a.common, &a.output), sub, matches)
        }
        Cmd::EstimateDirection(a) => {
            let sin = io::read_sinogram(&a.input, None).with_context(|| format!("reading {}", a.input.display()))?;
            let est = estimate_direction_with(&sin, &DirectionConfig { include_dc: a.include_dc })?;
            println!("theta_deg = {}", est.theta_deg);
            println!("argmax_index = {}", est.argmax_index);
            if let Some(path) = &a.scores {
                let rows: Vec<Vec<String>> = est
                    .scores
                    .iter()
                    .zip(sin.geometry().angles_deg())
                    .enumerate()
                    .map(|(k, (s, t))| vec![k.to_string(), t.to_string(), s.to_string()])
                    .collect();
                io::write_table(path, &["index", "angle_deg", "score"], &rows)?;
                write_manifest(&manifest_path(&a.common, path), sub, matches)?;
            } else if let Some(path) = &a.common.manifest {
                write_manifest(path, sub, matches)?;
            }
            Ok(())
        }
        Cmd::Fbp(a) => {
            let sin = load_sinogram(&a.inputs)?;
            let truth = load_truth(&a.inputs)?;
            let start = Instant::now();
            let img = fbp_reconstruct(&sin, &FbpConfig { filter: a.filter, pad_factor: a.pad })?;
            let row = MetricRow {
                method: "fbp".into(),
                params: format_params(&[("filter", a.filter.to_string()), ("pad", a.pad.to_string())]),
                psnr_db: f64::NAN,
                iterations: 0,
                wall_seconds: start.elapsed().as_secs_f64(),
            };
            save_image(&a.output, &img, a.inputs.pgm)?;
            report_metrics(&a.inputs, truth.as_ref(), &img, row)?;
            write_manifest(&manifest_path(&a.common, &a.output), sub, matches)
        }
        Cmd::Reconstruct(a) => {
            let sin = load_sinogram(&a.inputs)?;
            let truth = load_truth(&a.inputs)?;
            let start = Instant::now();
            let (reg, mut params) = match a.reg {
                Reg::Tv => (Regularizer::Tv, vec![]),
                Reg::Dtv => {
                    let theta = main_direction(&sin, a.theta)?;
                    (
                        Regularizer::Dtv(DtvParams::new(theta, a.a)?),
                        vec![("theta", theta.to_string()), ("a", a.a.to_string())],
                    )
                }
            };
            params.insert(0, ("lambda", a.lambda.to_string()));
            let rp = ReconstructParams { nonneg: a.nonneg, ..ReconstructParams::new(reg, a.lambda) };
            let (img, report) = reconstruct(&sin, &rp, &a.solver.config())?;
            warn_unconverged("reconstruction", &report);
            println!("iterations = {}", report.iterations);
            let row = MetricRow {
                method: match a.reg {
                    Reg::Tv => "tv",
                    Reg::Dtv => "dtv",
                }
                .into(),
                params: format_params(&params),
                psnr_db: f64::NAN,
                iterations: report.iterations,
                wall_seconds: start.elapsed().as_secs_f64(),
            };
            save_image(&a.output, &img, a.inputs.pgm)?;
            report_metrics(&a.inputs, truth.as_ref(), &img, row)?;
            write_manifest(&manifest_path(&a.common, &a.output), sub, matches)
        }
        Cmd::Split(a) => {
            let sin = load_sinogram(&a.inputs)?;
            let truth = load_truth(&a.inputs)?;
            let start = Instant::now();
            let m = main_index(&sin, a.theta)?;
            let spec = SplitSpec { main_index: m, k: a.k };
            let (res, name) = match a.method {
                SplitMethod::Fbp => (split_fbp(&sin, &spec, &FbpConfig { filter: a.filter, ..FbpConfig::default() })?, "split-fbp"),
                SplitMethod::Variational => {
                    let theta = sin.geometry().angles_deg()[m];
                    let p = SplitParams { lambda_u: a.lambda_u, lambda_v: a.lambda_v, beta: a.beta, dtv: DtvParams::new(theta, a.a)? };
                    let res = split_variational(&sin, &spec, &p, &a.solver.config())?;
                    if let Some((ru, rv)) = &res.reports {
                        warn_unconverged("fibre component", ru);
                        warn_unconverged("crack component", rv);
                    }
                    (res, "split-variational")
                }
            };
            save_image(&a.out_u, &res.u, a.inputs.pgm)?;
            save_image(&a.out_v, &res.v, a.inputs.pgm)?;
            let row = split_row(name, a.k, &res, start.elapsed().as_secs_f64());
            report_metrics(&a.inputs, truth.as_ref(), &res.u.sum(&res.v)?, row)?;
            write_manifest(&manifest_path(&a.common, &a.out_u), sub, matches)
        }
        Cmd::Decompose(a) => {
            let sin = load_sinogram(&a.inputs)?;
            let truth = load_truth(&a.inputs)?;
            let start = Instant::now();
            let theta = main_direction(&sin, a.model.theta)?;
            let p = a.model.params(theta);
            let d = decompose(&sin, &p, &a.solver.config())?;
            warn_unconverged("decomposition", &d.report);
            println!("iterations = {}", d.report.iterations);
            let sum = d.sum();
            save_image(&a.out_u, &d.u, a.inputs.pgm)?;
            save_image(&a.out_v, &d.v, a.inputs.pgm)?;
            save_image(&a.out_sum, &sum, a.inputs.pgm)?;
            let row = MetricRow {
                method: "decompose".into(),
                params: format_params(&[
                    ("lambda", p.lambda.to_string()),
                    ("alpha", p.alpha.to_string()),
                    ("beta", p.beta.to_string()),
                    ("a_u", p.a_u.to_string()),
                    ("a_v", p.a_v.to_string()),
                    ("theta", theta.to_string()),
                ]),
                psnr_db: f64::NAN,
                iterations: d.report.iterations,
                wall_seconds: start.elapsed().as_secs_f64(),
            };
            report_metrics(&a.inputs, truth.as_ref(), &sum, row)?;
            write_manifest(&manifest_path(&a.common, &a.out_sum), sub, matches)
        }
        Cmd::SweepAlpha(a) => {
            let sc = a.scenario.build()?;
            let theta = main_direction(&sc.noisy, a.model.theta)?;
            let crack = crack_mask(&sc.spec);
            let support = support_mask(sc.spec.size);
            let truth = GroundTruth { image: &sc.truth, crack: &crack, support: &support };
            let rows = alpha_sweep(&sc.noisy, &a.model.params(theta), &a.alphas, truth, &a.solver.config())?;
            let table: Vec<Vec<String>> = rows
                .iter()
                .map(|r| {
                    vec![
                        r.alpha.to_string(),
                        r.psnr.to_string(),
                        r.crack_capture.to_string(),
                        r.report.iterations.to_string(),
                        r.report.converged.to_string(),
                    ]
                })
                .collect();
            for row in &table {
                println!("{}", row.join(","));
            }
            io::write_table(&a.output, &["alpha", "psnr_db", "crack_capture", "iterations", "converged"], &table)?;
            write_manifest(&manifest_path(&a.common, &a.output), sub, matches)
        }
        Cmd::SweepK(a) => {
            let sc = a.scenario.build()?;
            let m = main_index(&sc.noisy, None)?;
            let theta = sc.noisy.geometry().angles_deg()[m];
            let crack = crack_mask(&sc.spec);
            let support = support_mask(sc.spec.size);
            let fibre = make_phantom(&PhantomSpec { crack_count: 0, ..sc.spec.clone() })?;
            let mut table = Vec::new();
            for &k in &a.ks {
                let spec = SplitSpec { main_index: m, k };
                let res = match a.method {
                    SplitMethod::Fbp => split_fbp(&sc.noisy, &spec, &FbpConfig::default())?,
                    SplitMethod::Variational => {
                        let p = SplitParams { lambda_u: a.lambda_u, lambda_v: a.lambda_v, beta: a.beta, dtv: DtvParams::new(theta, a.a)? };
                        split_variational(&sc.noisy, &spec, &p, &a.solver.config())?
                    }
                };
                let row = vec![
                    k.to_string(),
                    crack_capture(&res.v, &crack, &support)?.to_string(),
                    crack_signal(&res.u, &fibre, &crack, &support)?.to_string(),
                    res.reports.as_ref().map_or(0, |(u, _)| u.iterations).to_string(),
                    res.reports.as_ref().map_or(0, |(_, v)| v.iterations).to_string(),
                ];
                println!("{}", row.join(","));
                table.push(row);
            }
            io::write_table(&a.output, &["k", "crack_capture_v", "crack_signal_u", "iterations_u", "iterations_v"], &table)?;
            write_manifest(&manifest_path(&a.common, &a.output), sub, matches)
        }
        Cmd::SweepNoise(a) => {
            let spec = a.shape.spec();
            let img = make_phantom(&spec)?;
            let geom = Geometry::parallel(spec.size, spec.size, a.nangles)?;
            let clean = forward_project(&img, &geom)?;
            let step = 180.0 / a.nangles as f64;
            let mut table = Vec::new();
            for (li, &level) in a.levels.iter().enumerate() {
                let mut estimates = Vec::new();
                for run in 0..a.runs {
                    let seed = a.noise_seed + 1000 * li as u64 + run;
                    let noisy = add_noise(&clean, &NoiseSpec { level, seed })?;
                    estimates.push(estimate_direction(&noisy)?.theta_deg);
                }
                let hits = estimates.iter().filter(|&&t| angle_distance(t, spec.main_angle_deg) <= step + 1e-9).count();
                let mean = estimates.iter().sum::<f64>() / estimates.len().max(1) as f64;
                let row = vec![
                    level.to_string(),
                    a.runs.to_string(),
                    estimates.first().map_or(String::new(), |t| t.to_string()),
                    mean.to_string(),
                    hits.to_string(),
                ];
                println!("{}", row.join(","));
                table.push(row);
            }
            io::write_table(&a.output, &["noise_level", "runs", "estimate_deg", "mean_estimate_deg", "hits"], &table)?;
            write_manifest(&manifest_path(&a.common, &a.output), sub, matches)
        }
    }
}

/// Distance between two directions, modulo 180 degrees.
fn angle_distance(a: f64, b: f64) -> f64 {
    let d = (a - b).rem_euclid(180.0);
    d.min(180.0 - d)
}
