use nalgebra::Vector2;
use serde::{Deserialize, Serialize};

use crate::assign::SceneFlow3D;
use crate::error::{Error, Result};
use crate::flow::{sample_clamped, FlowField2D};
use crate::geometry::{euler_to_matrix, project, CalibParams, Intrinsics, PixelCoord};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum FlowSampling {
    Bilinear,
    Nearest,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ObjectiveOptions {
    /// Cost of a pair that yields no usable sample.
    pub empty_penalty: f64,
    /// Samples where either motion vector is shorter than this, in pixels,
    /// are dropped.
    pub min_motion: f64,
    /// Divide each pair's stacked norm by the square root of its sample
    /// count. When false the raw stacked norm is used.
    pub normalize_by_count: bool,
    pub sampling: FlowSampling,
}

impl Default for ObjectiveOptions {
    fn default() -> Self {
        ObjectiveOptions {
            empty_penalty: 2.0,
            min_motion: 0.05,
            normalize_by_count: true,
            sampling: FlowSampling::Bilinear,
        }
    }
}

/// Camera and LiDAR motion at one reprojected pixel, both unit length.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MotionSample {
    pub pixel: PixelCoord,
    pub cam: Vector2<f64>,
    pub lidar: Vector2<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PairCost {
    pub cost: f64,
    pub samples: usize,
}

/// Projects both endpoints of every valid 3D motion vector. A vector is
/// emitted only when both projections are valid; it starts at the first
/// projection.
pub fn lidar_motion_to_image(
    theta: &CalibParams,
    k: &Intrinsics,
    sf: &SceneFlow3D,
) -> Vec<(PixelCoord, Vector2<f64>)> {
    let tf = euler_to_matrix(theta);
    sf.source
        .points
        .iter()
        .zip(&sf.displacement)
        .zip(&sf.valid)
        .filter(|(_, valid)| **valid)
        .filter_map(|((p, d), _)| {
            let a = project(k, &tf.apply(p))?;
            let b = project(k, &tf.apply(&(p + d)))?;
            Some((a, Vector2::new(b.u - a.u, b.v - a.v)))
        })
        .collect()
}

fn sample_camera(f: &FlowField2D, at: PixelCoord, mode: FlowSampling) -> Vector2<f64> {
    let (u, v) = match mode {
        FlowSampling::Bilinear => sample_clamped(f, at.u, at.v),
        FlowSampling::Nearest => sample_clamped(f, at.u.round(), at.v.round()),
    };
    Vector2::new(u, v)
}

/// Unit-normalized motion pairs at every reprojected pixel where both
/// modalities move by at least `opts.min_motion` pixels.
pub fn motion_samples(
    theta: &CalibParams,
    k: &Intrinsics,
    cam: &FlowField2D,
    sf: &SceneFlow3D,
    opts: &ObjectiveOptions,
) -> Result<Vec<MotionSample>> {
    if cam.width != k.width || cam.height != k.height {
        return Err(Error::dims(
            format!("{}x{}", k.width, k.height),
            format!("{}x{}", cam.width, cam.height),
        ));
    }
    Ok(lidar_motion_to_image(theta, k, sf)
        .into_iter()
        .filter_map(|(pixel, lidar)| {
            let c = sample_camera(cam, pixel, opts.sampling);
            let (nc, nl) = (c.norm(), lidar.norm());
            (nc >= opts.min_motion && nl >= opts.min_motion).then(|| MotionSample {
                pixel,
                cam: c / nc,
                lidar: lidar / nl,
            })
        })
        .collect())
}

pub fn pair_cost(
    theta: &CalibParams,
    k: &Intrinsics,
    cam: &FlowField2D,
    sf: &SceneFlow3D,
    opts: &ObjectiveOptions,
) -> Result<PairCost> {
    let samples = motion_samples(theta, k, cam, sf, opts)?;
    if samples.is_empty() {
        return Ok(PairCost {
            cost: opts.empty_penalty,
            samples: 0,
        });
    }
    let sq: f64 = samples.iter().map(|s| (s.cam - s.lidar).norm_squared()).sum();
    let cost = if opts.normalize_by_count {
        (sq / samples.len() as f64).sqrt()
    } else {
        sq.sqrt()
    };
    Ok(PairCost {
        cost,
        samples: samples.len(),
    })
}

/// Mean per-pair motion disagreement over the sequence.
pub fn objective(
    theta: &CalibParams,
    k: &Intrinsics,
    flows2d: &[FlowField2D],
    flows3d: &[SceneFlow3D],
    opts: &ObjectiveOptions,
) -> Result<f64> {
    if flows2d.len() != flows3d.len() {
        return Err(Error::dims(
            format!("{} scene flows", flows2d.len()),
            format!("{}", flows3d.len()),
        ));
    }
    if flows2d.is_empty() {
        return Err(Error::InvalidArgument("no frame pairs".into()));
    }
    let mut total = 0.0;
    let mut any = false;
    for (cam, sf) in flows2d.iter().zip(flows3d) {
        let p = pair_cost(theta, k, cam, sf, opts)?;
        any |= p.samples > 0;
        total += p.cost;
    }
    if !any {
        return Err(Error::NoMotion);
    }
    Ok(total / flows2d.len() as f64)
}
