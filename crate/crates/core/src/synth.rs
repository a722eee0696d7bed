//! Seeded synthetic scenes with exact ground truth.
//!
//! The world is a street canyon (ground, two facades, a back wall) with
//! rigid boxes standing on the ground and translating at constant velocity.
//! The LiDAR frame uses camera-like axes (x right, y down, z forward), so
//! realistic extrinsics are small rotations.
//!
//! Every surface carries a procedural texture in its own material
//! coordinates. LiDAR points are material points as well, so a point keeps
//! its identity from frame to frame and static points do not move. Images
//! are ray cast with 2x2 supersampling; ground-truth depth is splatted from
//! the noise-free cloud with the same projection as [`sparse_depth_of`].

use nalgebra::Vector3;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::calib::{Frame, FrameSequence};
use crate::error::{Error, Result};
use crate::flow::GrayImage;
use crate::geometry::{
    euler_to_matrix, project, CalibParams, Intrinsics, Point3, PointCloud, RigidTransform,
};
use crate::upsample::SparseDepthMap;

/// Height of the sensor rig above the ground plane, meters.
pub const GROUND_Y: f64 = 1.65;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SceneSpec {
    pub rng_seed: u64,
    /// Number of frames, `L + 1`.
    pub frames: usize,
    /// LiDAR samples on the static surfaces.
    pub n_static_points: usize,
    pub n_moving_objects: usize,
    /// Probability that a moving object is vehicle sized rather than
    /// pedestrian sized.
    pub vehicle_fraction: f64,
    /// Object speed range, meters per frame.
    pub velocity_range: (f64, f64),
    /// Rig motion between consecutive frames, expressed in the LiDAR frame.
    pub ego_motion: CalibParams,
    pub true_extrinsics: CalibParams,
    pub intrinsics: Intrinsics,
    /// Depth range of moving object centers at mid-sequence, meters.
    pub object_depth_range: (f64, f64),
    /// Spacing of LiDAR samples on moving objects, meters.
    pub object_point_spacing: f64,
    /// Isotropic Gaussian jitter added to every LiDAR coordinate, meters.
    pub noise_sigma: f64,
    /// Seconds between frames.
    pub frame_interval: f64,
}

impl Default for SceneSpec {
    fn default() -> Self {
        SceneSpec {
            rng_seed: 0,
            frames: 6,
            n_static_points: 30_000,
            n_moving_objects: 5,
            vehicle_fraction: 0.5,
            velocity_range: (0.3, 0.8),
            ego_motion: CalibParams::ZERO,
            true_extrinsics: CalibParams::from_degrees_meters([1.5, -2.0, 3.0, 0.25, -0.15, -0.3]),
            intrinsics: Intrinsics {
                fx: 260.0,
                fy: 260.0,
                cx: 160.0,
                cy: 120.0,
                width: 320,
                height: 240,
            },
            object_depth_range: (7.0, 17.0),
            object_point_spacing: 0.08,
            noise_sigma: 0.0,
            frame_interval: 0.1,
        }
    }
}

impl SceneSpec {
    pub fn with_seed(seed: u64) -> Self {
        SceneSpec {
            rng_seed: seed,
            ..Default::default()
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GroundTruth {
    pub theta: CalibParams,
    /// Noise-free LiDAR clouds, index-aligned with the returned clouds.
    pub clean_clouds: Vec<PointCloud>,
    /// Per pair `l`, the displacement of every point of clean cloud `l`
    /// into the LiDAR frame of `l + 1`. The point itself may be hidden in
    /// frame `l + 1`.
    pub point_flow: Vec<Vec<Vector3<f64>>>,
    /// Camera depth per pixel splatted from the clean clouds. Pixels no
    /// point reaches are unsupported.
    pub depth: Vec<SparseDepthMap>,
}

/// Sum of plane waves over material coordinates, mapped into `[0, 1]`.
#[derive(Debug, Clone)]
struct Texture {
    waves: Vec<(f64, f64, f64, f64)>,
    total: f64,
}

impl Texture {
    fn random(rng: &mut ChaCha8Rng) -> Self {
        let waves: Vec<_> = (0..6)
            .map(|_| {
                let wavelength = rng.random_range(0.35..1.6);
                let dir = rng.random_range(0.0..std::f64::consts::PI);
                let k = std::f64::consts::TAU / wavelength;
                (k * dir.cos(), k * dir.sin(), rng.random_range(0.0..std::f64::consts::TAU), rng.random_range(0.4..1.0))
            })
            .collect();
        let total = waves.iter().map(|w| w.3).sum();
        Texture { waves, total }
    }

    fn eval(&self, a: f64, b: f64) -> f64 {
        let s: f64 = self
            .waves
            .iter()
            .map(|(ka, kb, ph, amp)| amp * (ka * a + kb * b + ph).sin())
            .sum();
        0.5 + 0.45 * s / self.total
    }
}

/// Textured rectangle `origin + a * ea + b * eb`, `a in [0, la]`, `b in [0, lb]`.
#[derive(Debug, Clone)]
struct Rect {
    origin: Vector3<f64>,
    ea: Vector3<f64>,
    eb: Vector3<f64>,
    la: f64,
    lb: f64,
    texture: usize,
}

impl Rect {
    fn point(&self, a: f64, b: f64) -> Vector3<f64> {
        self.origin + self.ea * a + self.eb * b
    }

    fn transformed(&self, tf: &RigidTransform) -> Rect {
        Rect {
            origin: tf.rotation * self.origin + tf.translation,
            ea: tf.rotation * self.ea,
            eb: tf.rotation * self.eb,
            ..self.clone()
        }
    }

    /// Ray parameter and material coordinates of the hit, if any.
    #[inline]
    fn intersect(&self, o: &Vector3<f64>, d: &Vector3<f64>) -> Option<(f64, f64, f64)> {
        let n = self.ea.cross(&self.eb);
        let denom = d.dot(&n);
        if denom.abs() < 1e-12 {
            return None;
        }
        let s = (self.origin - o).dot(&n) / denom;
        if s <= 1e-9 {
            return None;
        }
        let rel = o + d * s - self.origin;
        let (a, b) = (rel.dot(&self.ea), rel.dot(&self.eb));
        (a >= 0.0 && a <= self.la && b >= 0.0 && b <= self.lb).then_some((s, a, b))
    }
}

/// Rigid box resting on the ground and moving at constant velocity.
#[derive(Debug, Clone)]
struct MovingBox {
    faces: Vec<Rect>,
    heading: f64,
    center0: Vector3<f64>,
    velocity: Vector3<f64>,
    radius: f64,
}

impl MovingBox {
    fn new(size: Vector3<f64>, heading: f64, center0: Vector3<f64>, velocity: Vector3<f64>, textures: &mut Vec<Texture>, rng: &mut ChaCha8Rng) -> Self {
        let h = size / 2.0;
        let x = Vector3::x();
        let y = Vector3::y();
        let z = Vector3::z();
        let mut face = |origin: Vector3<f64>, ea: Vector3<f64>, eb: Vector3<f64>, la: f64, lb: f64| {
            textures.push(Texture::random(rng));
            Rect {
                origin,
                ea,
                eb,
                la,
                lb,
                texture: textures.len() - 1,
            }
        };
        let faces = vec![
            face(Vector3::new(-h.x, -h.y, -h.z), x, y, size.x, size.y),
            face(Vector3::new(-h.x, -h.y, h.z), x, y, size.x, size.y),
            face(Vector3::new(-h.x, -h.y, -h.z), z, y, size.z, size.y),
            face(Vector3::new(h.x, -h.y, -h.z), z, y, size.z, size.y),
            face(Vector3::new(-h.x, -h.y, -h.z), x, z, size.x, size.z),
            face(Vector3::new(-h.x, h.y, -h.z), x, z, size.x, size.z),
        ];
        MovingBox {
            faces,
            heading,
            center0,
            velocity,
            radius: (h.x * h.x + h.z * h.z).sqrt(),
        }
    }

    fn pose(&self, frame: usize) -> RigidTransform {
        RigidTransform {
            rotation: crate::geometry::rotation_y(self.heading),
            translation: self.center0 + self.velocity * frame as f64,
        }
    }

    fn center(&self, frame: f64) -> Vector3<f64> {
        self.center0 + self.velocity * frame
    }
}

struct Scene {
    statics: Vec<Rect>,
    boxes: Vec<MovingBox>,
    textures: Vec<Texture>,
}

const BACK_Z: f64 = 24.0;
const HALF_WIDTH: f64 = 7.0;
const TOP_Y: f64 = -14.0;

fn build_scene(spec: &SceneSpec, rng: &mut ChaCha8Rng) -> Scene {
    let mut textures = Vec::new();
    let mut tex = |rng: &mut ChaCha8Rng| {
        textures.push(Texture::random(rng));
        textures.len() - 1
    };
    let near = -4.0;
    let depth = BACK_Z - near;
    let height = GROUND_Y - TOP_Y;
    let statics = vec![
        // ground
        Rect {
            origin: Vector3::new(-HALF_WIDTH, GROUND_Y, near),
            ea: Vector3::x(),
            eb: Vector3::z(),
            la: 2.0 * HALF_WIDTH,
            lb: depth,
            texture: tex(rng),
        },
        // facades
        Rect {
            origin: Vector3::new(-HALF_WIDTH, TOP_Y, near),
            ea: Vector3::z(),
            eb: Vector3::y(),
            la: depth,
            lb: height,
            texture: tex(rng),
        },
        Rect {
            origin: Vector3::new(HALF_WIDTH, TOP_Y, near),
            ea: Vector3::z(),
            eb: Vector3::y(),
            la: depth,
            lb: height,
            texture: tex(rng),
        },
        // back wall
        Rect {
            origin: Vector3::new(-HALF_WIDTH, TOP_Y, BACK_Z),
            ea: Vector3::x(),
            eb: Vector3::y(),
            la: 2.0 * HALF_WIDTH,
            lb: height,
            texture: tex(rng),
        },
    ];

    let frames = spec.frames as f64;
    let mut boxes: Vec<MovingBox> = Vec::new();
    for _ in 0..spec.n_moving_objects {
        for _attempt in 0..200 {
            let vehicle = rng.random_bool(spec.vehicle_fraction.clamp(0.0, 1.0));
            let size = if vehicle {
                Vector3::new(rng.random_range(1.6..1.9), rng.random_range(1.4..1.7), rng.random_range(3.8..4.6))
            } else {
                Vector3::new(rng.random_range(0.5..0.7), rng.random_range(1.6..1.85), rng.random_range(0.4..0.6))
            };
            let direction = rng.random_range(0.0..std::f64::consts::TAU);
            let speed = rng.random_range(spec.velocity_range.0..=spec.velocity_range.1);
            let velocity = Vector3::new(direction.sin(), 0.0, direction.cos()) * speed;
            let heading = direction;
            let mid = Vector3::new(rng.random_range(-4.5..4.5), GROUND_Y - size.y / 2.0, rng.random_range(spec.object_depth_range.0..spec.object_depth_range.1));
            let center0 = mid - velocity * ((frames - 1.0) / 2.0);
            let candidate = MovingBox::new(size, heading, center0, velocity, &mut Vec::new(), &mut rng.clone());
            let fits = (0..spec.frames).all(|l| {
                let c = candidate.center(l as f64);
                c.x.abs() + candidate.radius < HALF_WIDTH - 0.2
                    && c.z - candidate.radius > 4.0
                    && c.z + candidate.radius < BACK_Z - 0.5
                    && boxes.iter().all(|b| {
                        let d = b.center(l as f64) - c;
                        (d.x * d.x + d.z * d.z).sqrt() > b.radius + candidate.radius + 0.3
                    })
            });
            if fits {
                boxes.push(MovingBox::new(size, heading, center0, velocity, &mut textures, rng));
                break;
            }
        }
    }
    Scene {
        statics,
        boxes,
        textures,
    }
}

/// A material point: which surface and where on it.
#[derive(Debug, Clone, Copy)]
enum Material {
    Static { rect: usize, a: f64, b: f64 },
    Object { object: usize, face: usize, a: f64, b: f64 },
}

impl Scene {
    /// World position of a material point at a frame.
    fn position(&self, m: &Material, frame: usize) -> Vector3<f64> {
        match *m {
            Material::Static { rect, a, b } => self.statics[rect].point(a, b),
            Material::Object { object, face, a, b } => {
                let bx = &self.boxes[object];
                let p = bx.faces[face].point(a, b);
                let pose = bx.pose(frame);
                pose.rotation * p + pose.translation
            }
        }
    }

    /// Indices of the material points with a clear line of sight from
    /// `origin` at a frame.
    fn visible_from(&self, materials: &[Material], frame: usize, origin: &Vector3<f64>) -> Vec<usize> {
        let rects = self.rects_at(frame, &RigidTransform::identity());
        (0..materials.len())
            .filter(|&i| {
                let d = self.position(&materials[i], frame) - origin;
                !rects
                    .iter()
                    .any(|r| r.intersect(origin, &d).is_some_and(|(s, _, _)| s < 1.0 - 1e-6))
            })
            .collect()
    }

    /// All rectangles at a frame, mapped by `tf` (world to camera).
    fn rects_at(&self, frame: usize, tf: &RigidTransform) -> Vec<Rect> {
        let mut out: Vec<Rect> = self.statics.iter().map(|r| r.transformed(tf)).collect();
        for b in &self.boxes {
            let pose = tf.compose(&b.pose(frame));
            out.extend(b.faces.iter().map(|r| r.transformed(&pose)));
        }
        out
    }
}

/// Rig pose of frame `l` in world coordinates.
fn rig_pose(ego: &RigidTransform, frame: usize) -> RigidTransform {
    (0..frame).fold(RigidTransform::identity(), |acc, _| acc.compose(ego))
}

fn sample_materials(spec: &SceneSpec, scene: &Scene, rng: &mut ChaCha8Rng) -> Vec<Material> {
    let k = &spec.intrinsics;
    let cam = euler_to_matrix(&spec.true_extrinsics);
    let cam_to_world = cam.inverse();
    let origin = cam_to_world.translation;
    let mut out = Vec::new();

    // static surfaces: first hit of jittered stratified camera rays
    let cells = spec.n_static_points.max(1) as f64;
    let step = ((k.width * k.height) as f64 / cells).sqrt();
    let (nu, nv) = ((k.width as f64 / step).ceil() as usize, (k.height as f64 / step).ceil() as usize);
    for j in 0..nv {
        for i in 0..nu {
            let u = (i as f64 + rng.random_range(0.0..1.0)) * step - 0.5;
            let v = (j as f64 + rng.random_range(0.0..1.0)) * step - 0.5;
            let d = cam_to_world.rotation * Vector3::new((u - k.cx) / k.fx, (v - k.cy) / k.fy, 1.0);
            let hit = scene
                .statics
                .iter()
                .enumerate()
                .filter_map(|(idx, r)| r.intersect(&origin, &d).map(|(s, a, b)| (s, idx, a, b)))
                .min_by(|x, y| x.0.total_cmp(&y.0));
            if let Some((_, rect, a, b)) = hit {
                out.push(Material::Static { rect, a, b });
            }
        }
    }

    // objects: jittered grid over every face
    let h = spec.object_point_spacing;
    for (object, bx) in scene.boxes.iter().enumerate() {
        for (face, r) in bx.faces.iter().enumerate() {
            let (na, nb) = ((r.la / h).ceil() as usize, (r.lb / h).ceil() as usize);
            let (sa, sb) = (r.la / na as f64, r.lb / nb as f64);
            for i in 0..na {
                for j in 0..nb {
                    let a = (i as f64 + rng.random_range(0.0..1.0)) * sa;
                    let b = (j as f64 + rng.random_range(0.0..1.0)) * sb;
                    out.push(Material::Object { object, face, a, b });
                }
            }
        }
    }
    out
}

fn render(scene: &Scene, frame: usize, world_to_cam: &RigidTransform, k: &Intrinsics) -> GrayImage {
    let rects = scene.rects_at(frame, world_to_cam);
    let origin = Vector3::zeros();
    let mut img = GrayImage::filled(k.width, k.height, 0.5);
    const SUB: [f64; 2] = [-0.25, 0.25];
    for y in 0..k.height {
        for x in 0..k.width {
            let mut acc = 0.0;
            for dy in SUB {
                for dx in SUB {
                    let d = Vector3::new((x as f64 + dx - k.cx) / k.fx, (y as f64 + dy - k.cy) / k.fy, 1.0);
                    let hit = rects
                        .iter()
                        .filter_map(|r| r.intersect(&origin, &d).map(|(s, a, b)| (s, r.texture, a, b)))
                        .min_by(|p, q| p.0.total_cmp(&q.0));
                    acc += match hit {
                        Some((s, tex, a, b)) => {
                            // s is the camera depth because d has unit z
                            scene.textures[tex].eval(a, b) * (0.65 + 0.35 * (-s / 40.0).exp())
                        }
                        None => 0.5,
                    };
                }
            }
            img.set(x, y, acc / 4.0);
        }
    }
    img
}

/// Pixel hit by a camera-frame point, using the same rounding as
/// [`sparse_depth_of`].
fn pixel_of(k: &Intrinsics, p: &Point3) -> Option<(usize, usize)> {
    let px = project(k, p)?;
    let (x, y) = (px.u.round() as usize, px.v.round() as usize);
    (x < k.width && y < k.height).then_some((x, y))
}

/// Z-buffered reprojection of a LiDAR cloud: the nearest depth wins each
/// pixel. Pixel centers sit at integer coordinates.
pub fn project_depth(cloud: &PointCloud, theta: &CalibParams, k: &Intrinsics) -> SparseDepthMap {
    let tf = euler_to_matrix(theta);
    let mut map = SparseDepthMap::empty(k.width, k.height);
    for p in &cloud.points {
        let q = tf.apply(p);
        if let Some((x, y)) = pixel_of(k, &q) {
            map.insert_nearest(y, x, q.z);
        }
    }
    map
}

pub fn sparse_depth_of(seq: &FrameSequence, l: usize, theta: &CalibParams) -> SparseDepthMap {
    project_depth(&seq.frames[l].cloud, theta, &seq.intrinsics)
}

/// Depth splatting with a 3x3 kernel. Pixels hit by a point center keep the
/// nearest center depth; remaining pixels take the nearest depth among
/// neighbouring centers.
pub fn splat_depth(cloud: &PointCloud, theta: &CalibParams, k: &Intrinsics) -> SparseDepthMap {
    let centers = project_depth(cloud, theta, k);
    let mut out = centers.clone();
    let (w, h) = (k.width, k.height);
    for x in 0..w {
        for y in 0..h {
            if centers.get(y, x).is_some() {
                continue;
            }
            let mut best: Option<f64> = None;
            for nx in x.saturating_sub(1)..=(x + 1).min(w - 1) {
                for ny in y.saturating_sub(1)..=(y + 1).min(h - 1) {
                    if let Some(d) = centers.get(ny, nx) {
                        best = Some(best.map_or(d, |b: f64| b.min(d)));
                    }
                }
            }
            if let Some(d) = best {
                out.insert_nearest(y, x, d);
            }
        }
    }
    out
}

pub fn generate(spec: &SceneSpec) -> Result<(FrameSequence, GroundTruth)> {
    spec.intrinsics.validate()?;
    if spec.frames < 2 {
        return Err(Error::InvalidArgument("a scene needs at least two frames".into()));
    }
    let ego_static = spec.ego_motion.to_array().iter().all(|v| *v == 0.0);
    let objects_static = spec.n_moving_objects == 0 || spec.velocity_range.1 <= 0.0;
    if ego_static && objects_static {
        return Err(Error::StaticScene);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(spec.rng_seed);
    let scene = build_scene(spec, &mut rng);
    let materials = sample_materials(spec, &scene, &mut rng);
    let ego = euler_to_matrix(&spec.ego_motion);
    let cam = euler_to_matrix(&spec.true_extrinsics);
    let noise = Normal::new(0.0, spec.noise_sigma.max(0.0)).map_err(|e| Error::InvalidArgument(e.to_string()))?;

    let mut frames = Vec::with_capacity(spec.frames);
    let mut clean_clouds = Vec::with_capacity(spec.frames);
    let mut depth = Vec::with_capacity(spec.frames);
    let mut point_flow = Vec::with_capacity(spec.frames - 1);
    for l in 0..spec.frames {
        let rig_to_world = rig_pose(&ego, l);
        let world_to_rig = rig_to_world.inverse();
        let to_rig = |x: Vector3<f64>| Point3::from(world_to_rig.rotation * x + world_to_rig.translation);
        let visible = scene.visible_from(&materials, l, &rig_to_world.translation);
        let clean: PointCloud = visible.iter().map(|&i| to_rig(scene.position(&materials[i], l))).collect();
        if l + 1 < spec.frames {
            let next_to_rig = rig_pose(&ego, l + 1).inverse();
            point_flow.push(
                visible
                    .iter()
                    .zip(&clean.points)
                    .map(|(&i, p)| {
                        let q = next_to_rig.rotation * scene.position(&materials[i], l + 1) + next_to_rig.translation;
                        q - p.coords
                    })
                    .collect(),
            );
        }
        let noisy: PointCloud = if spec.noise_sigma > 0.0 {
            clean
                .points
                .iter()
                .map(|p| p + Vector3::new(noise.sample(&mut rng), noise.sample(&mut rng), noise.sample(&mut rng)))
                .collect()
        } else {
            clean.clone()
        };
        let image = render(&scene, l, &cam.compose(&world_to_rig), &spec.intrinsics);
        depth.push(splat_depth(&clean, &spec.true_extrinsics, &spec.intrinsics));
        let t = l as f64 * spec.frame_interval;
        frames.push(Frame {
            image,
            cloud: noisy,
            timestamp: t,
            cloud_timestamp: t,
        });
        clean_clouds.push(clean);
    }
    Ok((
        FrameSequence {
            intrinsics: spec.intrinsics,
            frames,
        },
        GroundTruth {
            theta: spec.true_extrinsics,
            clean_clouds,
            point_flow,
            depth,
        },
    ))
}
