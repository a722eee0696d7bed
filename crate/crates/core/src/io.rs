//! On-disk formats: KITTI Velodyne scans and calibration files, grayscale
//! images, 16-bit depth PNGs, raw float planes with a JSON sidecar, reports,
//! and whole frame directories.
//!
//! A frame directory mirrors the KITTI raw layout:
//!
//! ```text
//! calib.txt                         (or calib_velo_to_cam.txt + calib_cam_to_cam.txt)
//! image_00/data/0000000000.png      (image_02 is used when image_00 is absent)
//! image_00/timestamps.txt           optional
//! velodyne_points/data/0000000000.bin
//! velodyne_points/timestamps.txt    optional
//! ```

use std::collections::HashMap;
use std::fs;
use std::path::{Path, PathBuf};

use image::{DynamicImage, ImageBuffer, Luma};
use nalgebra::{Matrix3, Matrix3x4, Vector3};
use serde::{Deserialize, Serialize};

use crate::calib::{Frame, FrameSequence};
use crate::error::{Error, Result};
use crate::flow::{FlowField2D, GrayImage};
use crate::geometry::{euler_to_matrix, CalibParams, Intrinsics, Point3, PointCloud, RigidTransform};
use crate::upsample::{DenseDepthMap, SparseDepthMap};

/// Meters per unit of a depth PNG.
pub const DEPTH_PNG_SCALE: f64 = 1.0 / 256.0;

/// Used when a sequence has no timestamp files.
pub const DEFAULT_FRAME_INTERVAL: f64 = 0.1;

const ORTHONORMAL_TOL: f64 = 1e-6;

fn read_bytes(path: &Path) -> Result<Vec<u8>> {
    fs::read(path).map_err(|e| Error::io(path, e))
}

fn read_text(path: &Path) -> Result<String> {
    fs::read_to_string(path).map_err(|e| Error::io(path, e))
}

fn write_bytes(path: &Path, bytes: &[u8]) -> Result<()> {
    fs::write(path, bytes).map_err(|e| Error::io(path, e))
}

fn create_dir(path: &Path) -> Result<()> {
    fs::create_dir_all(path).map_err(|e| Error::io(path, e))
}

fn malformed(path: &Path, offset: usize, reason: impl Into<String>) -> Error {
    Error::MalformedFile {
        path: path.to_path_buf(),
        offset,
        reason: reason.into(),
    }
}

// ---------------------------------------------------------------- velodyne

/// Reads little-endian `(x, y, z, reflectance)` float quadruples.
pub fn read_velodyne_bin(path: impl AsRef<Path>) -> Result<PointCloud> {
    let path = path.as_ref();
    let bytes = read_bytes(path)?;
    if bytes.len() % 16 != 0 {
        return Err(malformed(
            path,
            bytes.len() - bytes.len() % 16,
            format!("size {} is not a multiple of 16 bytes", bytes.len()),
        ));
    }
    let mut points = Vec::with_capacity(bytes.len() / 16);
    let mut reflectance = Vec::with_capacity(bytes.len() / 16);
    let mut bad = 0usize;
    let mut first_bad = 0usize;
    for (i, rec) in bytes.chunks_exact(16).enumerate() {
        let f: Vec<f32> = rec.chunks_exact(4).map(|b| f32::from_le_bytes([b[0], b[1], b[2], b[3]])).collect();
        if f.iter().any(|v| !v.is_finite()) {
            if bad == 0 {
                first_bad = i * 16;
            }
            bad += 1;
            continue;
        }
        points.push(Point3::new(f[0] as f64, f[1] as f64, f[2] as f64));
        reflectance.push(f[3]);
    }
    if bad > 0 {
        return Err(malformed(path, first_bad, format!("{bad} points carry non-finite values")));
    }
    Ok(PointCloud { points, reflectance })
}

/// Coordinates are stored as `f32`. Missing reflectance is written as zero.
pub fn write_velodyne_bin(path: impl AsRef<Path>, cloud: &PointCloud) -> Result<()> {
    let mut out = Vec::with_capacity(cloud.len() * 16);
    for (i, p) in cloud.points.iter().enumerate() {
        let r = cloud.reflectance.get(i).copied().unwrap_or(0.0);
        for v in [p.x as f32, p.y as f32, p.z as f32, r] {
            out.extend_from_slice(&v.to_le_bytes());
        }
    }
    write_bytes(path.as_ref(), &out)
}

// ------------------------------------------------------------- calibration

/// LiDAR-to-camera calibration in KITTI terms.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KittiCalib {
    /// Velodyne to unrectified camera.
    pub rotation: Matrix3<f64>,
    pub translation: Vector3<f64>,
    pub rectification: Matrix3<f64>,
    pub projection: Matrix3x4<f64>,
    /// `(width, height)` from `S_rect`, when present.
    pub image_size: Option<(usize, usize)>,
}

struct KeyValues {
    path: PathBuf,
    rows: HashMap<String, (usize, Vec<f64>)>,
}

impl KeyValues {
    fn parse(path: &Path, text: &str) -> Result<KeyValues> {
        let mut rows = HashMap::new();
        for (n, line) in text.lines().enumerate() {
            let Some((key, rest)) = line.split_once(':') else {
                continue;
            };
            let key = key.trim();
            if key == "calib_time" || key.is_empty() {
                continue;
            }
            let values: std::result::Result<Vec<f64>, _> = rest.split_whitespace().map(str::parse).collect();
            let values = values.map_err(|e| malformed(path, n + 1, format!("`{key}`: {e}")))?;
            rows.insert(key.to_string(), (n + 1, values));
        }
        Ok(KeyValues {
            path: path.to_path_buf(),
            rows,
        })
    }

    fn merge(mut self, other: KeyValues) -> KeyValues {
        self.rows.extend(other.rows);
        self
    }

    fn find(&self, keys: &[&str], len: usize) -> Result<Option<Vec<f64>>> {
        for key in keys {
            if let Some((line, v)) = self.rows.get(*key) {
                if v.len() != len {
                    return Err(malformed(
                        &self.path,
                        *line,
                        format!("`{key}` has {} values, expected {len}", v.len()),
                    ));
                }
                return Ok(Some(v.clone()));
            }
        }
        Ok(None)
    }

    fn require(&self, keys: &[&str], len: usize) -> Result<Vec<f64>> {
        self.find(keys, len)?.ok_or_else(|| Error::MissingKey {
            path: self.path.clone(),
            key: keys[0].to_string(),
        })
    }
}

fn check_orthonormal(r: &Matrix3<f64>) -> Result<()> {
    let deviation = (r.transpose() * r - Matrix3::identity()).amax();
    if deviation > ORTHONORMAL_TOL {
        return Err(Error::NonOrthonormal { deviation });
    }
    Ok(())
}

impl KittiCalib {
    fn from_keys(kv: &KeyValues, camera: u8) -> Result<KittiCalib> {
        let c = format!("{camera:02}");
        let rect_key = format!("R_rect_{c}");
        let proj_key = format!("P_rect_{c}");
        let size_key = format!("S_rect_{c}");
        let odo_proj = format!("P{camera}");

        let (rotation, translation, odometry) = match kv.find(&["Tr", "Tr_velo_to_cam", "Tr_velo_cam"], 12)? {
            Some(tr) => {
                let m = Matrix3x4::from_row_slice(&tr);
                (m.fixed_view::<3, 3>(0, 0).into_owned(), m.column(3).into_owned(), true)
            }
            None => {
                let r = kv.require(&["R"], 9)?;
                let t = kv.require(&["T"], 3)?;
                (Matrix3::from_row_slice(&r), Vector3::from_row_slice(&t), false)
            }
        };
        // the odometry layout is already rectified
        let rectification = match kv.find(&["R_rect", &rect_key, "R0_rect"], 9)? {
            Some(r) => Matrix3::from_row_slice(&r),
            None if odometry => Matrix3::identity(),
            None => kv.require(&["R_rect", &rect_key], 9).map(|r| Matrix3::from_row_slice(&r))?,
        };
        let projection = Matrix3x4::from_row_slice(&kv.require(&["P_rect", &proj_key, &odo_proj, "P2"], 12)?);
        let image_size = kv
            .find(&["S_rect", &size_key], 2)?
            .map(|s| (s[0].round() as usize, s[1].round() as usize));
        check_orthonormal(&rotation)?;
        check_orthonormal(&rectification)?;
        Ok(KittiCalib {
            rotation,
            translation,
            rectification,
            projection,
            image_size,
        })
    }
}

/// Reads camera 0 of a calibration file, or of a directory holding either
/// `calib.txt` or the raw pair `calib_velo_to_cam.txt` and
/// `calib_cam_to_cam.txt`.
pub fn read_kitti_calib(path: impl AsRef<Path>) -> Result<KittiCalib> {
    read_kitti_calib_camera(path, 0)
}

pub fn read_kitti_calib_camera(path: impl AsRef<Path>, camera: u8) -> Result<KittiCalib> {
    let path = path.as_ref();
    let load = |p: &Path| KeyValues::parse(p, &read_text(p)?);
    let kv = if path.is_dir() {
        let single = path.join("calib.txt");
        if single.exists() {
            load(&single)?
        } else {
            load(&path.join("calib_velo_to_cam.txt"))?.merge(load(&path.join("calib_cam_to_cam.txt"))?)
        }
    } else {
        load(path)?
    };
    KittiCalib::from_keys(&kv, camera)
}

/// Folds rectification and the projection offset into one rigid transform
/// and reads the pinhole intrinsics off the projection matrix. The image
/// size comes from `S_rect`; set [`KittiCalib::image_size`] first when the
/// file has none.
pub fn kitti_to_params(c: &KittiCalib) -> Result<(CalibParams, Intrinsics)> {
    let k = c.projection.fixed_view::<3, 3>(0, 0).into_owned();
    let offset = k
        .try_inverse()
        .ok_or_else(|| Error::InvalidArgument("projection matrix is singular".into()))?
        * c.projection.column(3);
    let tf = RigidTransform {
        rotation: c.rectification * c.rotation,
        translation: c.rectification * c.translation + offset,
    };
    let (width, height) = c.image_size.unwrap_or((0, 0));
    let intrinsics = Intrinsics::new(k[(0, 0)], k[(1, 1)], k[(0, 2)], k[(1, 2)], width, height)?;
    Ok((tf.to_params(), intrinsics))
}

/// Writes a single-file calibration with identity rectification.
pub fn write_kitti_calib(path: impl AsRef<Path>, theta: &CalibParams, k: &Intrinsics) -> Result<()> {
    let tf = euler_to_matrix(theta);
    let row = |v: &[f64]| v.iter().map(|x| format!("{x:e}")).collect::<Vec<_>>().join(" ");
    let r: Vec<f64> = tf.rotation.transpose().iter().copied().collect();
    let t: Vec<f64> = tf.translation.iter().copied().collect();
    let text = format!(
        "R: {}\nT: {}\nR_rect: {}\nP_rect: {}\nS_rect: {} {}\n",
        row(&r),
        row(&t),
        row(&[1.0, 0.0, 0.0, 0.0, 1.0, 0.0, 0.0, 0.0, 1.0]),
        row(&[k.fx, 0.0, k.cx, 0.0, 0.0, k.fy, k.cy, 0.0, 0.0, 0.0, 1.0, 0.0]),
        k.width,
        k.height
    );
    write_bytes(path.as_ref(), text.as_bytes())
}

// ------------------------------------------------------------------ images

const LUMA: [f64; 3] = [0.299, 0.587, 0.114];

/// Accepts 8/16-bit grayscale and RGB(A) PNGs; color is converted to luma.
pub fn read_image_gray(path: impl AsRef<Path>) -> Result<GrayImage> {
    let path = path.as_ref();
    let img = image::open(path)?;
    let (w, h) = (img.width() as usize, img.height() as usize);
    let luma = |px: &[f64]| px.iter().zip(LUMA).map(|(c, k)| c * k).sum::<f64>();
    let data: Vec<f64> = match img {
        DynamicImage::ImageLuma8(b) => b.pixels().map(|p| p[0] as f64 / 255.0).collect(),
        DynamicImage::ImageLuma16(b) => b.pixels().map(|p| p[0] as f64 / 65535.0).collect(),
        DynamicImage::ImageRgb8(b) => b.pixels().map(|p| luma(&p.0.map(|c| c as f64 / 255.0))).collect(),
        DynamicImage::ImageRgba8(b) => b.pixels().map(|p| luma(&p.0[..3].iter().map(|c| *c as f64 / 255.0).collect::<Vec<_>>())).collect(),
        DynamicImage::ImageRgb16(b) => b.pixels().map(|p| luma(&p.0.map(|c| c as f64 / 65535.0))).collect(),
        DynamicImage::ImageRgba16(b) => b.pixels().map(|p| luma(&p.0[..3].iter().map(|c| *c as f64 / 65535.0).collect::<Vec<_>>())).collect(),
        other => {
            return Err(Error::UnsupportedFormat(format!(
                "{}: color type {:?}",
                path.display(),
                other.color()
            )))
        }
    };
    GrayImage::new(w, h, data.into_iter().map(|v| v.clamp(0.0, 1.0)).collect())
}

/// 16-bit grayscale PNG.
pub fn write_image_gray(path: impl AsRef<Path>, img: &GrayImage) -> Result<()> {
    let data: Vec<u16> = img.data().iter().map(|v| (v * 65535.0).round() as u16).collect();
    let buf: ImageBuffer<Luma<u16>, Vec<u16>> = ImageBuffer::from_raw(img.width() as u32, img.height() as u32, data)
        .ok_or_else(|| Error::dims(img.width() * img.height(), img.data().len()))?;
    buf.save(path.as_ref())?;
    Ok(())
}

// ------------------------------------------------------------------- depth

fn depth_to_png(v: f64) -> u16 {
    // a supported pixel never collapses onto the missing marker
    (v / DEPTH_PNG_SCALE).round().clamp(1.0, u16::MAX as f64) as u16
}

fn save_u16(path: &Path, width: usize, height: usize, row_major: Vec<u16>) -> Result<()> {
    let buf: ImageBuffer<Luma<u16>, Vec<u16>> =
        ImageBuffer::from_raw(width as u32, height as u32, row_major).ok_or_else(|| Error::dims(width * height, 0))?;
    buf.save(path)?;
    Ok(())
}

/// Depth in units of 1/256 m, 0 for unsupported pixels.
pub fn write_depth_png16(path: impl AsRef<Path>, map: &SparseDepthMap) -> Result<()> {
    let (w, h) = (map.width(), map.height());
    let mut px = vec![0u16; w * h];
    for y in 0..h {
        for x in 0..w {
            if let Some(d) = map.get(y, x) {
                px[y * w + x] = depth_to_png(d);
            }
        }
    }
    save_u16(path.as_ref(), w, h, px)
}

pub fn write_dense_depth_png16(path: impl AsRef<Path>, map: &DenseDepthMap) -> Result<()> {
    let (w, h) = (map.width, map.height);
    let mut px = vec![0u16; w * h];
    for y in 0..h {
        for x in 0..w {
            let d = map.get(y, x);
            if d.is_finite() && d > 0.0 {
                px[y * w + x] = depth_to_png(d);
            }
        }
    }
    save_u16(path.as_ref(), w, h, px)
}

/// Reads a 16-bit depth PNG. Zero pixels are unsupported.
pub fn read_depth_png16(path: impl AsRef<Path>) -> Result<SparseDepthMap> {
    let path = path.as_ref();
    let img = match image::open(path)? {
        DynamicImage::ImageLuma16(b) => b,
        other => {
            return Err(Error::UnsupportedFormat(format!(
                "{}: depth maps must be 16-bit grayscale, got {:?}",
                path.display(),
                other.color()
            )))
        }
    };
    let (w, h) = (img.width() as usize, img.height() as usize);
    let mut depth = vec![0.0; w * h];
    for (x, y, p) in img.enumerate_pixels() {
        depth[x as usize * h + y as usize] = p[0] as f64 * DEPTH_PNG_SCALE;
    }
    SparseDepthMap::from_values(w, h, depth)
}

// -------------------------------------------------------------- raw planes

/// Describes a raw plane file. It lives next to the data as `<file>.json`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PlaneHeader {
    pub width: usize,
    pub height: usize,
    pub planes: usize,
    pub dtype: String,
    pub order: String,
}

const COLUMN_MAJOR: &str = "column-major";
const ROW_MAJOR: &str = "row-major";

pub fn sidecar_path(path: &Path) -> PathBuf {
    let mut s = path.as_os_str().to_owned();
    s.push(".json");
    PathBuf::from(s)
}

/// Writes column-major `f32` planes, one after another.
fn write_planes(path: &Path, width: usize, height: usize, planes: &[Vec<f64>]) -> Result<()> {
    let header = PlaneHeader {
        width,
        height,
        planes: planes.len(),
        dtype: "float32-le".into(),
        order: COLUMN_MAJOR.into(),
    };
    let mut out = Vec::with_capacity(width * height * planes.len() * 4);
    for p in planes {
        if p.len() != width * height {
            return Err(Error::dims(width * height, p.len()));
        }
        out.extend(p.iter().flat_map(|v| (*v as f32).to_le_bytes()));
    }
    write_bytes(path, &out)?;
    write_bytes(&sidecar_path(path), serde_json::to_string_pretty(&header)?.as_bytes())
}

/// Returns column-major planes.
fn read_planes(path: &Path, expect_planes: usize) -> Result<(usize, usize, Vec<Vec<f64>>)> {
    let side = sidecar_path(path);
    let header: PlaneHeader = serde_json::from_str(&read_text(&side)?)?;
    if header.dtype != "float32-le" {
        return Err(Error::UnsupportedFormat(format!("{}: dtype {}", side.display(), header.dtype)));
    }
    if header.order != COLUMN_MAJOR && header.order != ROW_MAJOR {
        return Err(Error::UnsupportedFormat(format!("{}: order {}", side.display(), header.order)));
    }
    if header.planes != expect_planes {
        return Err(Error::dims(format!("{expect_planes} planes"), header.planes));
    }
    let bytes = read_bytes(path)?;
    let (w, h) = (header.width, header.height);
    let n = w * h;
    if bytes.len() != n * expect_planes * 4 {
        return Err(Error::dims(format!("{} bytes", n * expect_planes * 4), bytes.len()));
    }
    let values: Vec<f64> = bytes
        .chunks_exact(4)
        .map(|b| f32::from_le_bytes([b[0], b[1], b[2], b[3]]) as f64)
        .collect();
    let planes = values
        .chunks_exact(n.max(1))
        .take(expect_planes)
        .map(|p| {
            if header.order == COLUMN_MAJOR {
                p.to_vec()
            } else {
                let mut out = vec![0.0; n];
                for y in 0..h {
                    for x in 0..w {
                        out[x * h + y] = p[y * w + x];
                    }
                }
                out
            }
        })
        .collect();
    Ok((w, h, planes))
}

fn row_to_col(v: &[f64], w: usize, h: usize) -> Vec<f64> {
    let mut out = vec![0.0; w * h];
    for y in 0..h {
        for x in 0..w {
            out[x * h + y] = v[y * w + x];
        }
    }
    out
}

fn col_to_row(v: &[f64], w: usize, h: usize) -> Vec<f64> {
    let mut out = vec![0.0; w * h];
    for y in 0..h {
        for x in 0..w {
            out[y * w + x] = v[x * h + y];
        }
    }
    out
}

/// Planes `u` then `v` as `f32`.
pub fn write_flow(path: impl AsRef<Path>, f: &FlowField2D) -> Result<()> {
    let (w, h) = (f.width, f.height);
    write_planes(path.as_ref(), w, h, &[row_to_col(&f.u, w, h), row_to_col(&f.v, w, h)])
}

pub fn read_flow(path: impl AsRef<Path>) -> Result<FlowField2D> {
    let (w, h, planes) = read_planes(path.as_ref(), 2)?;
    FlowField2D::new(w, h, col_to_row(&planes[0], w, h), col_to_row(&planes[1], w, h))
}

pub fn write_depth_raw(path: impl AsRef<Path>, map: &DenseDepthMap) -> Result<()> {
    write_planes(path.as_ref(), map.width, map.height, std::slice::from_ref(&map.depth))
}

pub fn read_depth_raw(path: impl AsRef<Path>) -> Result<DenseDepthMap> {
    let (w, h, mut planes) = read_planes(path.as_ref(), 1)?;
    DenseDepthMap::new(w, h, planes.remove(0))
}

// ----------------------------------------------------------------- reports

pub fn write_report_json<T: Serialize>(path: impl AsRef<Path>, report: &T) -> Result<()> {
    write_bytes(path.as_ref(), serde_json::to_string_pretty(report)?.as_bytes())
}

// ------------------------------------------------------------------ frames

/// One timestamp per line, either KITTI `YYYY-MM-DD HH:MM:SS.fffffffff` or
/// plain seconds. Returns seconds since the Unix epoch for the former.
pub fn read_timestamps(path: impl AsRef<Path>) -> Result<Vec<f64>> {
    let path = path.as_ref();
    let text = read_text(path)?;
    text.lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(n, l)| {
            let l = l.trim();
            if let Ok(s) = l.parse::<f64>() {
                return Ok(s);
            }
            let dt = chrono::NaiveDateTime::parse_from_str(l, "%Y-%m-%d %H:%M:%S%.f")
                .map_err(|e| malformed(path, n + 1, format!("timestamp `{l}`: {e}")))?
                .and_utc();
            Ok(dt.timestamp() as f64 + dt.timestamp_subsec_nanos() as f64 * 1e-9)
        })
        .collect()
}

fn frame_name(i: usize) -> String {
    format!("{i:010}")
}

fn image_dir(dir: &Path) -> Result<(PathBuf, u8)> {
    for (name, cam) in [("image_00", 0u8), ("image_02", 2)] {
        let p = dir.join(name);
        if p.is_dir() {
            return Ok((p, cam));
        }
    }
    Err(Error::io(
        dir.join("image_00"),
        std::io::Error::new(std::io::ErrorKind::NotFound, "no image_00 or image_02 directory"),
    ))
}

/// Loads a frame directory. Timestamps default to index times 0.1 s and are
/// shifted so the first image is at zero.
pub fn read_frames_dir(dir: impl AsRef<Path>) -> Result<FrameSequence> {
    read_frames_dir_with_calib(dir).map(|(seq, _)| seq)
}

/// [`read_frames_dir`] plus the extrinsics stored in the calibration file.
pub fn read_frames_dir_with_calib(dir: impl AsRef<Path>) -> Result<(FrameSequence, CalibParams)> {
    let dir = dir.as_ref();
    if !dir.is_dir() {
        return Err(Error::io(dir, std::io::Error::new(std::io::ErrorKind::NotFound, "not a directory")));
    }
    let (img_dir, camera) = image_dir(dir)?;
    let velo_dir = dir.join("velodyne_points");
    let mut names: Vec<String> = fs::read_dir(img_dir.join("data"))
        .map_err(|e| Error::io(img_dir.join("data"), e))?
        .filter_map(|e| e.ok())
        .filter_map(|e| e.file_name().to_str().and_then(|n| n.strip_suffix(".png")).map(str::to_owned))
        .collect();
    names.sort();

    let mut calib = read_kitti_calib_camera(dir, camera)?;
    let mut images = Vec::with_capacity(names.len());
    for n in &names {
        images.push(read_image_gray(img_dir.join("data").join(format!("{n}.png")))?);
    }
    if let Some(first) = images.first() {
        calib.image_size.get_or_insert((first.width(), first.height()));
    }
    let (theta, intrinsics) = kitti_to_params(&calib)?;

    let stamps = |p: PathBuf| -> Result<Vec<f64>> {
        if p.exists() {
            let t = read_timestamps(&p)?;
            if t.len() < names.len() {
                return Err(malformed(&p, t.len() + 1, format!("{} timestamps for {} frames", t.len(), names.len())));
            }
            Ok(t)
        } else {
            Ok((0..names.len()).map(|i| i as f64 * DEFAULT_FRAME_INTERVAL).collect())
        }
    };
    let t_img = stamps(img_dir.join("timestamps.txt"))?;
    let t_velo = stamps(velo_dir.join("timestamps.txt"))?;
    let origin = t_img.first().copied().unwrap_or(0.0);

    let mut frames = Vec::with_capacity(names.len());
    for (i, (n, image)) in names.iter().zip(images).enumerate() {
        let cloud = read_velodyne_bin(velo_dir.join("data").join(format!("{n}.bin")))?;
        frames.push(Frame {
            image,
            cloud,
            timestamp: t_img[i] - origin,
            cloud_timestamp: t_velo[i] - origin,
        });
    }
    Ok((FrameSequence { intrinsics, frames }, theta))
}

/// Writes a sequence in the layout [`read_frames_dir`] reads, with `theta`
/// as the calibration file's extrinsics.
pub fn write_frames_dir(dir: impl AsRef<Path>, seq: &FrameSequence, theta: &CalibParams) -> Result<()> {
    let dir = dir.as_ref();
    let img_data = dir.join("image_00").join("data");
    let velo_data = dir.join("velodyne_points").join("data");
    create_dir(&img_data)?;
    create_dir(&velo_data)?;
    write_kitti_calib(dir.join("calib.txt"), theta, &seq.intrinsics)?;
    let mut t_img = String::new();
    let mut t_velo = String::new();
    for (i, f) in seq.frames.iter().enumerate() {
        write_image_gray(img_data.join(format!("{}.png", frame_name(i))), &f.image)?;
        write_velodyne_bin(velo_data.join(format!("{}.bin", frame_name(i))), &f.cloud)?;
        t_img.push_str(&format!("{}\n", f.timestamp));
        t_velo.push_str(&format!("{}\n", f.cloud_timestamp));
    }
    write_bytes(&dir.join("image_00").join("timestamps.txt"), t_img.as_bytes())?;
    write_bytes(&dir.join("velodyne_points").join("timestamps.txt"), t_velo.as_bytes())
}
