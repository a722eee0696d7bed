//! Extrinsic self-calibration from motion: the cross-modal objective, the
//! Nelder-Mead minimizer and the end-to-end pipeline.

mod objective;
mod pipeline;
mod simplex;

pub use objective::{
    lidar_motion_to_image, motion_samples, objective, pair_cost, FlowSampling, MotionSample,
    ObjectiveOptions, PairCost,
};
pub use pipeline::{
    calibrate, calibrate_precomputed, precompute, CalibOptions, CalibReport, Precomputed,
};
pub use simplex::{nelder_mead, SimplexOptions, SimplexResult, ANGLE_SCALE, TRANSLATION_SCALE};

use crate::error::{Error, Result};
use crate::flow::GrayImage;
use crate::geometry::{Intrinsics, PointCloud};

/// Default tolerated skew between an image and its cloud, seconds.
pub const DEFAULT_SYNC_TOL: f64 = 0.025;

/// One synchronized capture.
#[derive(Debug, Clone, PartialEq)]
pub struct Frame {
    pub image: GrayImage,
    pub cloud: PointCloud,
    /// Image capture time, seconds.
    pub timestamp: f64,
    /// Cloud capture time, seconds.
    pub cloud_timestamp: f64,
}

/// `L + 1` frames give `L` consecutive pairs.
#[derive(Debug, Clone, PartialEq)]
pub struct FrameSequence {
    pub intrinsics: Intrinsics,
    pub frames: Vec<Frame>,
}

impl FrameSequence {
    pub fn pairs(&self) -> usize {
        self.frames.len().saturating_sub(1)
    }

    /// Keeps the first `pairs + 1` frames.
    pub fn truncated(&self, pairs: usize) -> FrameSequence {
        FrameSequence {
            intrinsics: self.intrinsics,
            frames: self.frames.iter().take(pairs + 1).cloned().collect(),
        }
    }

    /// Checks ordering, image sizes and per-frame image/cloud skew.
    pub fn validate(&self, sync_tol: f64) -> Result<()> {
        self.intrinsics.validate()?;
        if self.frames.len() < 2 {
            return Err(Error::InvalidArgument(format!(
                "need at least two frames, got {}",
                self.frames.len()
            )));
        }
        let k = &self.intrinsics;
        for (i, f) in self.frames.iter().enumerate() {
            if f.image.width() != k.width || f.image.height() != k.height {
                return Err(Error::dims(
                    format!("{}x{}", k.width, k.height),
                    format!("{}x{} in frame {i}", f.image.width(), f.image.height()),
                ));
            }
            let skew = (f.timestamp - f.cloud_timestamp).abs();
            if !(skew <= sync_tol) {
                return Err(Error::SyncViolation {
                    frame: i,
                    reason: format!("image/cloud skew {:.1} ms exceeds {:.1} ms", skew * 1e3, sync_tol * 1e3),
                });
            }
            if i > 0 && !(f.timestamp > self.frames[i - 1].timestamp) {
                return Err(Error::SyncViolation {
                    frame: i,
                    reason: "timestamps are not strictly increasing".into(),
                });
            }
        }
        Ok(())
    }
}
