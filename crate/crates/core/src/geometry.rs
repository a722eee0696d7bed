//! Rigid transforms parameterized by Euler angles plus translation, and the
//! zero-distortion pinhole camera.
//!
//! Rotations compose as `R = Rz(yaw) * Ry(pitch) * Rx(roll)`, i.e. roll is
//! applied first. A transform maps LiDAR coordinates into the camera frame:
//! `x_cam = R * x_lidar + t`.

use nalgebra::{Matrix3, Vector3};
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

use crate::error::{Error, Result};

pub type Point3 = nalgebra::Point3<f64>;

/// Points closer than this to the image plane (meters) never project.
pub const DEFAULT_Z_MIN: f64 = 0.1;

/// Six-degree-of-freedom LiDAR-to-camera extrinsics. Angles in radians,
/// translation in meters.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct CalibParams {
    pub roll: f64,
    pub pitch: f64,
    pub yaw: f64,
    pub tx: f64,
    pub ty: f64,
    pub tz: f64,
}

impl CalibParams {
    pub const ZERO: CalibParams = CalibParams {
        roll: 0.0,
        pitch: 0.0,
        yaw: 0.0,
        tx: 0.0,
        ty: 0.0,
        tz: 0.0,
    };

    pub const NAMES: [&'static str; 6] = ["roll", "pitch", "yaw", "x", "y", "z"];

    pub fn new(roll: f64, pitch: f64, yaw: f64, tx: f64, ty: f64, tz: f64) -> Self {
        CalibParams {
            roll,
            pitch,
            yaw,
            tx,
            ty,
            tz,
        }
    }

    pub fn from_array(a: [f64; 6]) -> Self {
        CalibParams::new(a[0], a[1], a[2], a[3], a[4], a[5])
    }

    pub fn to_array(&self) -> [f64; 6] {
        [self.roll, self.pitch, self.yaw, self.tx, self.ty, self.tz]
    }

    /// Builds parameters from user-facing units: degrees for the three
    /// angles, meters for the translation.
    pub fn from_degrees_meters(a: [f64; 6]) -> Self {
        CalibParams::new(
            a[0].to_radians(),
            a[1].to_radians(),
            a[2].to_radians(),
            a[3],
            a[4],
            a[5],
        )
    }

    pub fn to_degrees_meters(&self) -> [f64; 6] {
        [
            self.roll.to_degrees(),
            self.pitch.to_degrees(),
            self.yaw.to_degrees(),
            self.tx,
            self.ty,
            self.tz,
        ]
    }

    pub fn is_finite(&self) -> bool {
        self.to_array().iter().all(|v| v.is_finite())
    }

    /// Wraps all three angles into `(-pi, pi]`.
    pub fn canonicalized(&self) -> Self {
        CalibParams {
            roll: canonicalize_angle(self.roll),
            pitch: canonicalize_angle(self.pitch),
            yaw: canonicalize_angle(self.yaw),
            ..*self
        }
    }

    pub fn to_transform(&self) -> RigidTransform {
        euler_to_matrix(self)
    }

    /// Index-wise parameter difference with angles wrapped, `self - other`.
    pub fn difference(&self, other: &CalibParams) -> [f64; 6] {
        let a = self.to_array();
        let b = other.to_array();
        let mut d = [0.0; 6];
        for i in 0..6 {
            d[i] = a[i] - b[i];
            if i < 3 {
                d[i] = canonicalize_angle(d[i]);
            }
        }
        d
    }
}

/// Maps an angle into `(-pi, pi]`.
pub fn canonicalize_angle(a: f64) -> f64 {
    if a > -PI && a <= PI {
        return a;
    }
    let two_pi = 2.0 * PI;
    let mut r = a.rem_euclid(two_pi);
    if r > PI {
        r -= two_pi;
    }
    r
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RigidTransform {
    pub rotation: Matrix3<f64>,
    pub translation: Vector3<f64>,
}

impl RigidTransform {
    pub fn identity() -> Self {
        RigidTransform {
            rotation: Matrix3::identity(),
            translation: Vector3::zeros(),
        }
    }

    #[inline]
    pub fn apply(&self, p: &Point3) -> Point3 {
        Point3::from(self.rotation * p.coords + self.translation)
    }

    #[inline]
    pub fn apply_vector(&self, v: &Vector3<f64>) -> Vector3<f64> {
        self.rotation * v
    }

    /// Analytic inverse `(R^T, -R^T t)`.
    pub fn inverse(&self) -> Self {
        let rt = self.rotation.transpose();
        RigidTransform {
            rotation: rt,
            translation: -(rt * self.translation),
        }
    }

    /// `self * other`: applies `other` first.
    pub fn compose(&self, other: &RigidTransform) -> Self {
        RigidTransform {
            rotation: self.rotation * other.rotation,
            translation: self.rotation * other.translation + self.translation,
        }
    }

    /// Recovers Euler parameters. Near pitch = +-pi/2 roll is pinned to zero.
    pub fn to_params(&self) -> CalibParams {
        let (roll, pitch, yaw) = euler_from_rotation(&self.rotation);
        CalibParams::new(
            roll,
            pitch,
            yaw,
            self.translation.x,
            self.translation.y,
            self.translation.z,
        )
    }

    /// Largest entry of `|R^T R - I|`.
    pub fn orthonormality_error(&self) -> f64 {
        (self.rotation.transpose() * self.rotation - Matrix3::identity()).amax()
    }
}

pub fn rotation_x(a: f64) -> Matrix3<f64> {
    let (s, c) = a.sin_cos();
    Matrix3::new(1.0, 0.0, 0.0, 0.0, c, -s, 0.0, s, c)
}

pub fn rotation_y(a: f64) -> Matrix3<f64> {
    let (s, c) = a.sin_cos();
    Matrix3::new(c, 0.0, s, 0.0, 1.0, 0.0, -s, 0.0, c)
}

pub fn rotation_z(a: f64) -> Matrix3<f64> {
    let (s, c) = a.sin_cos();
    Matrix3::new(c, -s, 0.0, s, c, 0.0, 0.0, 0.0, 1.0)
}

/// `Rz(yaw) * Ry(pitch) * Rx(roll)`, written out in closed form.
pub fn rotation_from_euler(roll: f64, pitch: f64, yaw: f64) -> Matrix3<f64> {
    let (sr, cr) = roll.sin_cos();
    let (sp, cp) = pitch.sin_cos();
    let (sy, cy) = yaw.sin_cos();
    Matrix3::new(
        cy * cp,
        cy * sp * sr - sy * cr,
        cy * sp * cr + sy * sr,
        sy * cp,
        sy * sp * sr + cy * cr,
        sy * sp * cr - cy * sr,
        -sp,
        cp * sr,
        cp * cr,
    )
}

pub fn euler_from_rotation(r: &Matrix3<f64>) -> (f64, f64, f64) {
    let cp = (r[(0, 0)] * r[(0, 0)] + r[(1, 0)] * r[(1, 0)]).sqrt();
    let pitch = (-r[(2, 0)]).atan2(cp);
    if cp > 1e-10 {
        let roll = r[(2, 1)].atan2(r[(2, 2)]);
        let yaw = r[(1, 0)].atan2(r[(0, 0)]);
        (roll, pitch, yaw)
    } else {
        // gimbal lock: only roll -/+ yaw is observable
        let yaw = (-r[(0, 1)]).atan2(r[(1, 1)]);
        (0.0, pitch, yaw)
    }
}

pub fn euler_to_matrix(p: &CalibParams) -> RigidTransform {
    RigidTransform {
        rotation: rotation_from_euler(p.roll, p.pitch, p.yaw),
        translation: Vector3::new(p.tx, p.ty, p.tz),
    }
}

/// A LiDAR scan. Reflectance is carried through I/O but never interpreted.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct PointCloud {
    pub points: Vec<Point3>,
    pub reflectance: Vec<f32>,
}

impl PointCloud {
    pub fn new(points: Vec<Point3>) -> Self {
        PointCloud {
            points,
            reflectance: Vec::new(),
        }
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }
}

impl FromIterator<Point3> for PointCloud {
    fn from_iter<I: IntoIterator<Item = Point3>>(iter: I) -> Self {
        PointCloud::new(iter.into_iter().collect())
    }
}

pub fn transform_points(p: &CalibParams, cloud: &PointCloud) -> PointCloud {
    let tf = euler_to_matrix(p);
    PointCloud {
        points: cloud.points.iter().map(|x| tf.apply(x)).collect(),
        reflectance: cloud.reflectance.clone(),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Intrinsics {
    pub fx: f64,
    pub fy: f64,
    pub cx: f64,
    pub cy: f64,
    pub width: usize,
    pub height: usize,
}

impl Intrinsics {
    pub fn new(fx: f64, fy: f64, cx: f64, cy: f64, width: usize, height: usize) -> Result<Self> {
        let k = Intrinsics {
            fx,
            fy,
            cx,
            cy,
            width,
            height,
        };
        k.validate()?;
        Ok(k)
    }

    pub fn validate(&self) -> Result<()> {
        let ok = self.fx > 0.0
            && self.fy > 0.0
            && self.cx >= 0.0
            && self.cx < self.width as f64
            && self.cy >= 0.0
            && self.cy < self.height as f64;
        if ok {
            Ok(())
        } else {
            Err(Error::InvalidArgument(format!("bad intrinsics {self:?}")))
        }
    }

    /// Same optics restricted to a smaller sensor window anchored at the
    /// origin. Only the bounds change.
    pub fn cropped(&self, width: usize, height: usize) -> Self {
        Intrinsics {
            width,
            height,
            ..*self
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct PixelCoord {
    pub u: f64,
    pub v: f64,
}

impl PixelCoord {
    pub fn new(u: f64, v: f64) -> Self {
        PixelCoord { u, v }
    }
}

/// Pinhole projection with the default depth cutoff. `None` means the point
/// is behind/too close to the camera or lands outside the image.
#[inline]
pub fn project(k: &Intrinsics, pt: &Point3) -> Option<PixelCoord> {
    project_with(k, pt, DEFAULT_Z_MIN)
}

#[inline]
pub fn project_with(k: &Intrinsics, pt: &Point3, z_min: f64) -> Option<PixelCoord> {
    if !(pt.z > z_min) {
        return None;
    }
    let u = k.fx * pt.x / pt.z + k.cx;
    let v = k.fy * pt.y / pt.z + k.cy;
    if u >= 0.0 && u < k.width as f64 && v >= 0.0 && v < k.height as f64 {
        Some(PixelCoord { u, v })
    } else {
        None
    }
}

/// Inverse of [`project`] for a known depth along the optical axis.
pub fn back_project(k: &Intrinsics, px: PixelCoord, depth: f64) -> Point3 {
    Point3::new(
        (px.u - k.cx) * depth / k.fx,
        (px.v - k.cy) * depth / k.fy,
        depth,
    )
}
