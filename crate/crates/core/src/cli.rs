//! Command-line front end. Angles are degrees and translations meters at
//! this boundary.
//!
//! Exit codes: 0 success, 1 unconverged or other failure, 2 no usable
//! signal (no motion, static scene, empty depth support), 3 I/O or format
//! error, 64 usage error.

use std::ffi::OsString;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use serde::Serialize;

use crate::calib::{calibrate_precomputed, precompute, CalibOptions, FrameSequence, SimplexOptions};
use crate::error::Error;
use crate::flow::{tv_l1_flow, TvL1Options};
use crate::geometry::{CalibParams, Intrinsics};
use crate::io;
use crate::synth::{self, SceneSpec};
use crate::upsample::{upsample, UpsampleOptions};

pub const EXIT_OK: i32 = 0;
pub const EXIT_FAILURE: i32 = 1;
pub const EXIT_NO_SIGNAL: i32 = 2;
pub const EXIT_IO: i32 = 3;
pub const EXIT_USAGE: i32 = 64;

pub const PARAM_NAMES: [&str; 6] = ["roll", "pitch", "yaw", "x", "y", "z"];

#[derive(Debug, Parser)]
#[command(name = "lidarcam", version, about = "Targetless LiDAR-camera calibration and depth upsampling")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Estimate the LiDAR-to-camera extrinsics from motion.
    Calibrate(CalibrateArgs),
    /// Objective along one parameter with the other five held fixed.
    Sweep(SweepArgs),
    /// Dense depth from a sparse 16-bit depth PNG.
    Upsample(UpsampleArgs),
    /// TV-L1 optical flow between two images.
    Flow(FlowArgs),
    /// Write a synthetic scene as a frame directory.
    Synth(SynthArgs),
}

#[derive(Debug, Clone, Args)]
pub struct SourceArgs {
    /// KITTI-style frame directory.
    #[arg(long, conflicts_with = "synth_seed", required_unless_present = "synth_seed")]
    pub frames: Option<PathBuf>,
    /// Generate a synthetic sequence with this seed instead.
    #[arg(long)]
    pub synth_seed: Option<u64>,
    /// Number of frame pairs to use.
    #[arg(long, default_value_t = 5)]
    pub pairs: usize,
    /// LiDAR jitter for synthetic sequences, meters.
    #[arg(long, default_value_t = 0.0)]
    pub noise: f64,
}

#[derive(Debug, Args)]
pub struct CalibrateArgs {
    #[command(flatten)]
    pub source: SourceArgs,
    /// Initial guess "roll,pitch,yaw,x,y,z" in degrees and meters.
    #[arg(long, default_value = "0,0,0,0,0,0", allow_hyphen_values = true)]
    pub init: String,
    /// Simplex seed.
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct SweepArgs {
    #[command(flatten)]
    pub source: SourceArgs,
    /// roll, pitch, yaw, x, y or z.
    #[arg(long)]
    pub param: String,
    /// "start:stop:steps" offsets in degrees or meters.
    #[arg(long, default_value = "-10:10:21", allow_hyphen_values = true)]
    pub range: String,
    /// Sweep center; defaults to the sequence's reference calibration.
    #[arg(long, allow_hyphen_values = true)]
    pub center: Option<String>,
    /// CSV destination; stdout when absent.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct UpsampleArgs {
    #[arg(long)]
    pub sparse: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long, default_value_t = 0.1)]
    pub gamma: f64,
    #[arg(long, default_value_t = 0.0)]
    pub tau: f64,
    #[arg(long, default_value_t = 400)]
    pub max_iters: usize,
    /// Per-iteration objective as CSV.
    #[arg(long)]
    pub trace: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct FlowArgs {
    #[arg(long)]
    pub a: PathBuf,
    #[arg(long)]
    pub b: PathBuf,
    /// Raw flow planes; a JSON sidecar is written next to it.
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct SynthArgs {
    #[arg(long)]
    pub seed: u64,
    /// Number of frames, i.e. pairs + 1.
    #[arg(long, default_value_t = 6)]
    pub frames: usize,
    #[arg(long, default_value_t = 0.0)]
    pub noise: f64,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug)]
pub enum CliError {
    Usage(String),
    Run(Error),
    NotConverged,
}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        CliError::Run(e)
    }
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CliError::Usage(m) => write!(f, "usage: {m}"),
            CliError::Run(e) => write!(f, "{e}"),
            CliError::NotConverged => write!(f, "simplex did not converge"),
        }
    }
}

pub fn exit_code(e: &CliError) -> i32 {
    match e {
        CliError::Usage(_) => EXIT_USAGE,
        CliError::NotConverged => EXIT_FAILURE,
        CliError::Run(e) => match e {
            Error::NoMotion | Error::StaticScene | Error::EmptySupport => EXIT_NO_SIGNAL,
            Error::Io { .. }
            | Error::MalformedFile { .. }
            | Error::MissingKey { .. }
            | Error::NonOrthonormal { .. }
            | Error::UnsupportedFormat(_)
            | Error::Json(_)
            | Error::Image(_) => EXIT_IO,
            _ => EXIT_FAILURE,
        },
    }
}

/// Parses and runs a command line, returning the process exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
        }
    };
    match execute(&cli.command) {
        Ok(()) => EXIT_OK,
        Err(e) => {
            eprintln!("error: {e}");
            exit_code(&e)
        }
    }
}

pub fn execute(cmd: &Command) -> Result<(), CliError> {
    match cmd {
        Command::Calibrate(a) => cmd_calibrate(a),
        Command::Sweep(a) => cmd_sweep(a),
        Command::Upsample(a) => cmd_upsample(a),
        Command::Flow(a) => cmd_flow(a),
        Command::Synth(a) => cmd_synth(a),
    }
}

/// Parses "r,p,y,x,y,z" in degrees and meters.
pub fn parse_params(s: &str) -> Result<CalibParams, CliError> {
    let v: Vec<f64> = s
        .split(',')
        .map(|t| t.trim().parse::<f64>())
        .collect::<Result<_, _>>()
        .map_err(|e| CliError::Usage(format!("`{s}`: {e}")))?;
    let a: [f64; 6] = v
        .try_into()
        .map_err(|v: Vec<f64>| CliError::Usage(format!("expected 6 comma-separated values, got {}", v.len())))?;
    if a.iter().any(|x| !x.is_finite()) {
        return Err(CliError::Usage(format!("`{s}` has non-finite values")));
    }
    Ok(CalibParams::from_degrees_meters(a))
}

/// Parses "start:stop:steps" into evenly spaced values including both ends.
pub fn parse_range(s: &str) -> Result<Vec<f64>, CliError> {
    let parts: Vec<&str> = s.split(':').collect();
    let [a, b, n] = parts[..] else {
        return Err(CliError::Usage(format!("range `{s}` is not start:stop:steps")));
    };
    let bad = |e: &dyn std::fmt::Display| CliError::Usage(format!("range `{s}`: {e}"));
    let a: f64 = a.parse().map_err(|e| bad(&e))?;
    let b: f64 = b.parse().map_err(|e| bad(&e))?;
    let n: usize = n.parse().map_err(|e| bad(&e))?;
    if !(a.is_finite() && b.is_finite()) {
        return Err(bad(&"non-finite bound"));
    }
    match n {
        0 => Err(bad(&"zero steps")),
        1 => Ok(vec![a]),
        _ => Ok((0..n).map(|i| a + (b - a) * i as f64 / (n - 1) as f64).collect()),
    }
}

/// A sequence plus the calibration it is judged against: ground truth for
/// synthetic scenes, the calibration file for frame directories.
pub struct LoadedSequence {
    pub seq: FrameSequence,
    pub reference: CalibParams,
    pub synthetic: bool,
}

pub fn synth_spec(seed: u64, frames: usize, noise: f64) -> SceneSpec {
    SceneSpec {
        frames,
        noise_sigma: noise,
        ..SceneSpec::with_seed(seed)
    }
}

pub fn load_sequence(src: &SourceArgs) -> Result<LoadedSequence, CliError> {
    if src.pairs == 0 {
        return Err(CliError::Usage("--pairs must be at least 1".into()));
    }
    if let Some(seed) = src.synth_seed {
        let (seq, gt) = synth::generate(&synth_spec(seed, src.pairs + 1, src.noise))?;
        return Ok(LoadedSequence {
            seq,
            reference: gt.theta,
            synthetic: true,
        });
    }
    let dir = src.frames.as_ref().ok_or_else(|| CliError::Usage("--frames or --synth-seed is required".into()))?;
    let (seq, reference) = io::read_frames_dir_with_calib(dir)?;
    Ok(LoadedSequence {
        seq: seq.truncated(src.pairs),
        reference,
        synthetic: false,
    })
}

fn cmd_calibrate(a: &CalibrateArgs) -> Result<(), CliError> {
    let init = parse_params(&a.init)?;
    let loaded = load_sequence(&a.source)?;
    let opts = CalibOptions {
        init,
        simplex: SimplexOptions {
            rng_seed: a.seed,
            ..Default::default()
        },
        pairs: Some(a.source.pairs),
        ground_truth: Some(loaded.reference),
        ..Default::default()
    };
    let pre = precompute(&loaded.seq, &opts)?;
    let report = calibrate_precomputed(&pre, &opts)?;
    let json = serde_json::to_string_pretty(&report).map_err(Error::from)?;
    match &a.out {
        Some(p) => io::write_report_json(p, &report)?,
        None => println!("{json}"),
    }
    if report.converged {
        Ok(())
    } else {
        Err(CliError::NotConverged)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SweepRow {
    pub offset: f64,
    /// `None` when no pair yields a motion sample.
    pub cost: Option<f64>,
}

/// Offsets one parameter of `center`, in degrees for angles and meters for
/// translations, and evaluates the objective at each offset.
pub fn sweep_rows(
    pre: &crate::calib::Precomputed,
    center: &CalibParams,
    param: usize,
    offsets: &[f64],
    opts: &CalibOptions,
) -> Vec<SweepRow> {
    offsets
        .iter()
        .map(|&offset| {
            let mut p = center.to_degrees_meters();
            p[param] += offset;
            SweepRow {
                offset,
                cost: pre.objective(&CalibParams::from_degrees_meters(p), &opts.objective).ok(),
            }
        })
        .collect()
}

/// Interior strict local minima of a sweep, excluding the global one.
pub fn count_bumps(rows: &[SweepRow]) -> usize {
    let c: Vec<f64> = rows.iter().map(|r| r.cost.unwrap_or(f64::INFINITY)).collect();
    let best = c.iter().cloned().fold(f64::INFINITY, f64::min);
    (1..c.len().saturating_sub(1))
        .filter(|&i| c[i] < c[i - 1] && c[i] < c[i + 1] && c[i] > best)
        .count()
}

fn cmd_sweep(a: &SweepArgs) -> Result<(), CliError> {
    let param = PARAM_NAMES
        .iter()
        .position(|n| *n == a.param)
        .ok_or_else(|| CliError::Usage(format!("unknown parameter `{}`, expected one of {PARAM_NAMES:?}", a.param)))?;
    let offsets = parse_range(&a.range)?;
    let center = a.center.as_deref().map(parse_params).transpose()?;
    let loaded = load_sequence(&a.source)?;
    let opts = CalibOptions {
        pairs: Some(a.source.pairs),
        ..Default::default()
    };
    let pre = precompute(&loaded.seq, &opts)?;
    let rows = sweep_rows(&pre, &center.unwrap_or(loaded.reference), param, &offsets, &opts);
    let mut csv = String::from("offset,cost\n");
    for r in &rows {
        let _ = writeln!(csv, "{},{}", r.offset, r.cost.map_or("nan".into(), |c| c.to_string()));
    }
    match &a.out {
        Some(p) => std::fs::write(p, csv).map_err(|e| Error::io(p, e))?,
        None => print!("{csv}"),
    }
    eprintln!("local bumps off the minimum: {}", count_bumps(&rows));
    Ok(())
}

fn cmd_upsample(a: &UpsampleArgs) -> Result<(), CliError> {
    let sparse = io::read_depth_png16(&a.sparse)?;
    let opts = UpsampleOptions {
        gamma: a.gamma,
        tau: a.tau,
        max_iters: a.max_iters,
        ..Default::default()
    };
    opts.validate().map_err(|e| CliError::Usage(e.to_string()))?;
    let out = upsample(&sparse, &opts)?;
    io::write_dense_depth_png16(&a.out, &out.depth)?;
    if let Some(p) = &a.trace {
        let mut csv = String::from("iteration,cost\n");
        for (i, c) in out.cost_trace.iter().enumerate() {
            let _ = writeln!(csv, "{i},{c}");
        }
        std::fs::write(p, csv).map_err(|e| Error::io(p, e))?;
    }
    Ok(())
}

fn cmd_flow(a: &FlowArgs) -> Result<(), CliError> {
    let i0 = io::read_image_gray(&a.a)?;
    let i1 = io::read_image_gray(&a.b)?;
    let f = tv_l1_flow(&i0, &i1, &TvL1Options::default())?;
    io::write_flow(&a.out, &f)?;
    Ok(())
}

/// `ground_truth.json` of a synthetic dump.
#[derive(Debug, Clone, Serialize)]
pub struct SynthSummary {
    pub seed: u64,
    pub theta_deg_m: [f64; 6],
    pub intrinsics: Intrinsics,
    pub frames: usize,
    pub points_per_frame: Vec<usize>,
}

/// Writes a frame directory plus `ground_truth.json`, dense ground-truth
/// depth under `depth_gt/` and LiDAR reprojections under `sparse_depth/`.
pub fn write_synth_dump(dir: &Path, spec: &SceneSpec) -> Result<(), CliError> {
    let (seq, gt) = synth::generate(spec)?;
    io::write_frames_dir(dir, &seq, &gt.theta)?;
    let gt_dir = dir.join("depth_gt");
    let sparse_dir = dir.join("sparse_depth");
    for d in [&gt_dir, &sparse_dir] {
        std::fs::create_dir_all(d).map_err(|e| Error::io(d, e))?;
    }
    for (l, depth) in gt.depth.iter().enumerate() {
        let name = format!("{l:010}.png");
        io::write_depth_png16(gt_dir.join(&name), depth)?;
        io::write_depth_png16(sparse_dir.join(&name), &synth::sparse_depth_of(&seq, l, &gt.theta))?;
    }
    let summary = SynthSummary {
        seed: spec.rng_seed,
        theta_deg_m: gt.theta.to_degrees_meters(),
        intrinsics: seq.intrinsics,
        frames: seq.frames.len(),
        points_per_frame: seq.frames.iter().map(|f| f.cloud.len()).collect(),
    };
    io::write_report_json(dir.join("ground_truth.json"), &summary)?;
    Ok(())
}

fn cmd_synth(a: &SynthArgs) -> Result<(), CliError> {
    if a.frames < 2 {
        return Err(CliError::Usage("--frames must be at least 2".into()));
    }
    write_synth_dump(&a.out, &synth_spec(a.seed, a.frames, a.noise))
}
