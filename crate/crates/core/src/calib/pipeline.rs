use serde::{Deserialize, Serialize};

use super::objective::{objective, pair_cost, ObjectiveOptions};
use super::simplex::{nelder_mead, SimplexOptions};
use super::{FrameSequence, DEFAULT_SYNC_TOL};
use crate::assign::{scene_flow, SceneFlow3D, SceneFlowOptions};
use crate::error::{Error, Result};
use crate::flow::{tv_l1_flow, FlowField2D, TvL1Options};
use crate::geometry::{CalibParams, Intrinsics};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CalibOptions {
    pub init: CalibParams,
    /// `simplex.init` is replaced by `init`.
    pub simplex: SimplexOptions,
    pub objective: ObjectiveOptions,
    pub flow: TvL1Options,
    pub scene_flow: SceneFlowOptions,
    pub sync_tol: f64,
    /// Use only the first `pairs` frame pairs.
    pub pairs: Option<usize>,
    /// Reported against the estimate when present.
    pub ground_truth: Option<CalibParams>,
}

impl Default for CalibOptions {
    fn default() -> Self {
        CalibOptions {
            init: CalibParams::ZERO,
            simplex: SimplexOptions::default(),
            objective: ObjectiveOptions::default(),
            flow: TvL1Options::default(),
            scene_flow: SceneFlowOptions::default(),
            sync_tol: DEFAULT_SYNC_TOL,
            pairs: None,
            ground_truth: None,
        }
    }
}

/// The calibration-independent part of the pipeline: one camera flow and one
/// scene flow per frame pair.
#[derive(Debug, Clone, PartialEq)]
pub struct Precomputed {
    pub intrinsics: Intrinsics,
    pub flows2d: Vec<FlowField2D>,
    pub flows3d: Vec<SceneFlow3D>,
}

impl Precomputed {
    pub fn pairs(&self) -> usize {
        self.flows2d.len()
    }

    pub fn objective(&self, theta: &CalibParams, opts: &ObjectiveOptions) -> Result<f64> {
        objective(theta, &self.intrinsics, &self.flows2d, &self.flows3d, opts)
    }

    /// Usable samples per pair at `theta`.
    pub fn sample_counts(&self, theta: &CalibParams, opts: &ObjectiveOptions) -> Result<Vec<usize>> {
        self.flows2d
            .iter()
            .zip(&self.flows3d)
            .map(|(cam, sf)| Ok(pair_cost(theta, &self.intrinsics, cam, sf, opts)?.samples))
            .collect()
    }

    /// Keeps the first `pairs` pairs.
    pub fn truncated(&self, pairs: usize) -> Precomputed {
        Precomputed {
            intrinsics: self.intrinsics,
            flows2d: self.flows2d.iter().take(pairs).cloned().collect(),
            flows3d: self.flows3d.iter().take(pairs).cloned().collect(),
        }
    }
}

pub fn precompute(seq: &FrameSequence, opts: &CalibOptions) -> Result<Precomputed> {
    let seq = match opts.pairs {
        Some(0) => return Err(Error::InvalidArgument("at least one frame pair is required".into())),
        Some(l) if l < seq.pairs() => seq.truncated(l),
        _ => seq.clone(),
    };
    seq.validate(opts.sync_tol)?;
    let mut flows2d = Vec::with_capacity(seq.pairs());
    let mut flows3d = Vec::with_capacity(seq.pairs());
    for w in seq.frames.windows(2) {
        flows2d.push(tv_l1_flow(&w[0].image, &w[1].image, &opts.flow)?);
        flows3d.push(scene_flow(&w[0].cloud, &w[1].cloud, &opts.scene_flow)?);
    }
    Ok(Precomputed {
        intrinsics: seq.intrinsics,
        flows2d,
        flows3d,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CalibReport {
    /// Estimate as roll, pitch, yaw in degrees and x, y, z in meters.
    pub theta_deg_m: [f64; 6],
    #[serde(skip)]
    pub theta: CalibParams,
    pub cost: f64,
    pub iterations: usize,
    pub evaluations: usize,
    pub converged: bool,
    pub restarted: bool,
    pub trace: Vec<f64>,
    /// Estimate minus ground truth, degrees and meters.
    pub error_deg_m: Option<[f64; 6]>,
    pub samples_per_pair: Vec<usize>,
}

/// Minimizes the objective over precomputed flows. Fails with
/// [`Error::NoMotion`] when no pair carries motion at the initial guess.
pub fn calibrate_precomputed(pre: &Precomputed, opts: &CalibOptions) -> Result<CalibReport> {
    pre.objective(&opts.init, &opts.objective)?;
    let simplex = SimplexOptions {
        init: opts.init,
        ..opts.simplex
    };
    let penalty = opts.objective.empty_penalty;
    let result = nelder_mead(
        |theta| pre.objective(theta, &opts.objective).unwrap_or(penalty),
        &simplex,
    )?;
    let theta = result.theta.canonicalized();
    let error_deg_m = opts.ground_truth.map(|gt| {
        let mut d = theta.difference(&gt);
        d[..3].iter_mut().for_each(|a| *a = a.to_degrees());
        d
    });
    Ok(CalibReport {
        theta_deg_m: theta.to_degrees_meters(),
        theta,
        cost: result.cost,
        iterations: result.iterations,
        evaluations: result.evaluations,
        converged: result.converged,
        restarted: result.restarted,
        trace: result.trace,
        error_deg_m,
        samples_per_pair: pre.sample_counts(&theta, &opts.objective)?,
    })
}

/// Full pipeline: camera and scene flow for every pair, then simplex search.
pub fn calibrate(seq: &FrameSequence, opts: &CalibOptions) -> Result<CalibReport> {
    calibrate_precomputed(&precompute(seq, opts)?, opts)
}
