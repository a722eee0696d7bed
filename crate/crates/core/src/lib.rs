//! LiDAR-camera extrinsic calibration from motion cues, and dense depth
//! upsampling of projected LiDAR scans.
//!
//! Angles are radians and distances meters inside the library; the command
//! line and reports use degrees.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod assign;
pub mod calib;
pub mod cli;
pub mod error;
pub mod flow;
pub mod geometry;
pub mod io;
pub mod synth;
pub mod upsample;

pub use error::{Error, Result};
