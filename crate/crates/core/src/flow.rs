//! Dense optical flow with a TV-L1 energy, solved by the duality-based
//! scheme of Zach, Pock and Bischof in the coarse-to-fine, multi-warp form
//! popularized by Sánchez, Meinhardt-Llopis and Facciolo.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::PixelCoord;

/// Smallest image side accepted by [`tv_l1_flow`].
pub const MIN_SIDE: usize = 16;

/// Single-channel image with samples in `[0, 1]`, row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct GrayImage {
    width: usize,
    height: usize,
    data: Vec<f64>,
}

impl GrayImage {
    pub fn new(width: usize, height: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != width * height {
            return Err(Error::dims(width * height, data.len()));
        }
        if let Some(bad) = data.iter().find(|v| !(0.0..=1.0).contains(*v)) {
            return Err(Error::InvalidArgument(format!(
                "intensity {bad} outside [0, 1]"
            )));
        }
        Ok(GrayImage {
            width,
            height,
            data,
        })
    }

    pub fn filled(width: usize, height: usize, value: f64) -> Self {
        GrayImage {
            width,
            height,
            data: vec![value.clamp(0.0, 1.0); width * height],
        }
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    #[inline]
    pub fn get(&self, x: usize, y: usize) -> f64 {
        self.data[y * self.width + x]
    }

    pub fn set(&mut self, x: usize, y: usize, value: f64) {
        self.data[y * self.width + x] = value.clamp(0.0, 1.0);
    }

    pub fn mirrored(&self) -> GrayImage {
        let mut data = self.data.clone();
        for row in data.chunks_mut(self.width) {
            row.reverse();
        }
        GrayImage { data, ..*self }
    }
}

/// Per-pixel displacement `(u, v)` in pixels, row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct FlowField2D {
    pub width: usize,
    pub height: usize,
    pub u: Vec<f64>,
    pub v: Vec<f64>,
}

impl FlowField2D {
    pub fn zeros(width: usize, height: usize) -> Self {
        FlowField2D {
            width,
            height,
            u: vec![0.0; width * height],
            v: vec![0.0; width * height],
        }
    }

    pub fn constant(width: usize, height: usize, u: f64, v: f64) -> Self {
        FlowField2D {
            width,
            height,
            u: vec![u; width * height],
            v: vec![v; width * height],
        }
    }

    pub fn new(width: usize, height: usize, u: Vec<f64>, v: Vec<f64>) -> Result<Self> {
        let n = width * height;
        if u.len() != n || v.len() != n {
            return Err(Error::dims(n, format!("{}/{}", u.len(), v.len())));
        }
        Ok(FlowField2D {
            width,
            height,
            u,
            v,
        })
    }

    #[inline]
    pub fn at(&self, x: usize, y: usize) -> (f64, f64) {
        let k = y * self.width + x;
        (self.u[k], self.v[k])
    }

    /// Mirror about the vertical axis, negating `u`.
    pub fn mirrored(&self) -> FlowField2D {
        let mut out = self.clone();
        for y in 0..self.height {
            for x in 0..self.width {
                let src = y * self.width + (self.width - 1 - x);
                out.u[y * self.width + x] = -self.u[src];
                out.v[y * self.width + x] = self.v[src];
            }
        }
        out
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TvL1Options {
    /// Data term weight, tuned for intensities on a 0..255 scale.
    pub lambda: f64,
    pub theta: f64,
    pub tau: f64,
    pub pyramid_scale: f64,
    pub warps: usize,
    pub inner_iterations: usize,
    /// Coarsest pyramid level keeps at least this many pixels per side.
    pub min_level_side: usize,
    /// Integer factor by which both images are reduced before estimation;
    /// the flow is brought back to full resolution afterwards.
    pub downscale: usize,
}

impl Default for TvL1Options {
    fn default() -> Self {
        TvL1Options {
            lambda: 0.15,
            theta: 0.3,
            tau: 0.25,
            pyramid_scale: 0.5,
            warps: 5,
            inner_iterations: 30,
            min_level_side: MIN_SIDE,
            downscale: 1,
        }
    }
}

/// Plain `f64` plane used inside the solver.
#[derive(Clone)]
struct Plane {
    w: usize,
    h: usize,
    d: Vec<f64>,
}

impl Plane {
    fn zeros(w: usize, h: usize) -> Self {
        Plane {
            w,
            h,
            d: vec![0.0; w * h],
        }
    }

    #[inline]
    fn at(&self, x: usize, y: usize) -> f64 {
        self.d[y * self.w + x]
    }

    /// Bilinear sample with coordinates clamped to the grid.
    #[inline]
    fn bilinear(&self, x: f64, y: f64) -> f64 {
        let x = x.clamp(0.0, (self.w - 1) as f64);
        let y = y.clamp(0.0, (self.h - 1) as f64);
        let x0 = (x.floor() as usize).min(self.w - 1);
        let y0 = (y.floor() as usize).min(self.h - 1);
        let x1 = (x0 + 1).min(self.w - 1);
        let y1 = (y0 + 1).min(self.h - 1);
        let (fx, fy) = (x - x0 as f64, y - y0 as f64);
        let top = self.at(x0, y0) + fx * (self.at(x1, y0) - self.at(x0, y0));
        let bottom = self.at(x0, y1) + fx * (self.at(x1, y1) - self.at(x0, y1));
        top + fy * (bottom - top)
    }

    /// Central differences with replicated borders.
    fn central_gradient(&self) -> (Plane, Plane) {
        let (w, h) = (self.w, self.h);
        let mut gx = Plane::zeros(w, h);
        let mut gy = Plane::zeros(w, h);
        for y in 0..h {
            for x in 0..w {
                let (xl, xr) = (x.saturating_sub(1), (x + 1).min(w - 1));
                let (yu, yd) = (y.saturating_sub(1), (y + 1).min(h - 1));
                gx.d[y * w + x] = 0.5 * (self.at(xr, y) - self.at(xl, y));
                gy.d[y * w + x] = 0.5 * (self.at(x, yd) - self.at(x, yu));
            }
        }
        (gx, gy)
    }

    fn gaussian_blur(&self, sigma: f64) -> Plane {
        if sigma <= 0.0 {
            return self.clone();
        }
        let radius = (3.0 * sigma).ceil() as isize;
        let kernel: Vec<f64> = (-radius..=radius)
            .map(|i| (-(i * i) as f64 / (2.0 * sigma * sigma)).exp())
            .collect();
        let norm: f64 = kernel.iter().sum();
        let kernel: Vec<f64> = kernel.iter().map(|k| k / norm).collect();
        let (w, h) = (self.w as isize, self.h as isize);
        let mut tmp = Plane::zeros(self.w, self.h);
        for y in 0..h {
            for x in 0..w {
                let mut s = 0.0;
                for (k, kv) in kernel.iter().enumerate() {
                    let xx = (x + k as isize - radius).clamp(0, w - 1);
                    s += kv * self.d[(y * w + xx) as usize];
                }
                tmp.d[(y * w + x) as usize] = s;
            }
        }
        let mut out = Plane::zeros(self.w, self.h);
        for y in 0..h {
            for x in 0..w {
                let mut s = 0.0;
                for (k, kv) in kernel.iter().enumerate() {
                    let yy = (y + k as isize - radius).clamp(0, h - 1);
                    s += kv * tmp.d[(yy * w + x) as usize];
                }
                out.d[(y * w + x) as usize] = s;
            }
        }
        out
    }

    /// Resamples to `w x h` by pixel-center alignment.
    fn resample(&self, w: usize, h: usize) -> Plane {
        let (sx, sy) = (self.w as f64 / w as f64, self.h as f64 / h as f64);
        let mut out = Plane::zeros(w, h);
        for y in 0..h {
            for x in 0..w {
                out.d[y * w + x] =
                    self.bilinear((x as f64 + 0.5) * sx - 0.5, (y as f64 + 0.5) * sy - 0.5);
            }
        }
        out
    }

    /// Anti-aliased reduction by `scale < 1`.
    fn zoom_out(&self, w: usize, h: usize, scale: f64) -> Plane {
        let sigma = 0.6 * (1.0 / (scale * scale) - 1.0).max(0.0).sqrt();
        self.gaussian_blur(sigma).resample(w, h)
    }
}

fn check_pair(a: &GrayImage, b: &GrayImage) -> Result<()> {
    if a.width != b.width || a.height != b.height {
        return Err(Error::dims(
            format!("{}x{}", a.width, a.height),
            format!("{}x{}", b.width, b.height),
        ));
    }
    if a.width.min(a.height) < MIN_SIDE {
        return Err(Error::TooSmall {
            width: a.width,
            height: a.height,
            min: MIN_SIDE,
        });
    }
    Ok(())
}

/// Flow from `a` to `b`: `a(x) ≈ b(x + w(x))`.
pub fn tv_l1_flow(a: &GrayImage, b: &GrayImage, opts: &TvL1Options) -> Result<FlowField2D> {
    check_pair(a, b)?;
    if !(opts.lambda > 0.0 && opts.theta > 0.0 && opts.tau > 0.0) {
        return Err(Error::InvalidArgument(
            "lambda, theta and tau must be positive".into(),
        ));
    }
    if !(opts.pyramid_scale > 0.0 && opts.pyramid_scale < 1.0) {
        return Err(Error::InvalidArgument(
            "pyramid scale must lie in (0, 1)".into(),
        ));
    }
    let to_plane = |g: &GrayImage| Plane {
        w: g.width,
        h: g.height,
        d: g.data.iter().map(|v| v * 255.0).collect(),
    };
    let mut i0 = to_plane(a);
    let mut i1 = to_plane(b);
    let factor = opts.downscale.max(1);
    if factor > 1 {
        let (w, h) = (a.width / factor, a.height / factor);
        if w.min(h) < MIN_SIDE {
            return Err(Error::TooSmall {
                width: w,
                height: h,
                min: MIN_SIDE,
            });
        }
        let s = 1.0 / factor as f64;
        i0 = i0.zoom_out(w, h, s);
        i1 = i1.zoom_out(w, h, s);
    }

    // pyramid, finest first
    let mut levels = vec![(i0, i1)];
    let min_side = opts.min_level_side.max(2);
    loop {
        let (p0, p1) = levels.last().expect("at least one level");
        let w = (p0.w as f64 * opts.pyramid_scale).round() as usize;
        let h = (p0.h as f64 * opts.pyramid_scale).round() as usize;
        if w.min(h) < min_side {
            break;
        }
        let next = (
            p0.zoom_out(w, h, opts.pyramid_scale),
            p1.zoom_out(w, h, opts.pyramid_scale),
        );
        levels.push(next);
    }

    let mut u: Option<(Plane, Plane)> = None;
    for (p0, p1) in levels.iter().rev() {
        let (u1, u2) = match u.take() {
            None => (Plane::zeros(p0.w, p0.h), Plane::zeros(p0.w, p0.h)),
            Some((c1, c2)) => {
                let (sx, sy) = (p0.w as f64 / c1.w as f64, p0.h as f64 / c1.h as f64);
                let mut f1 = c1.resample(p0.w, p0.h);
                let mut f2 = c2.resample(p0.w, p0.h);
                f1.d.iter_mut().for_each(|v| *v *= sx);
                f2.d.iter_mut().for_each(|v| *v *= sy);
                (f1, f2)
            }
        };
        u = Some(solve_level(p0, p1, u1, u2, opts));
    }
    let (mut u1, mut u2) = u.expect("pyramid has a level");
    if factor > 1 {
        let f = factor as f64;
        u1 = u1.resample(a.width, a.height);
        u2 = u2.resample(a.width, a.height);
        u1.d.iter_mut().for_each(|v| *v *= f);
        u2.d.iter_mut().for_each(|v| *v *= f);
    }
    FlowField2D::new(a.width, a.height, u1.d, u2.d)
}

/// Warps and inner iterations on one pyramid level.
fn solve_level(i0: &Plane, i1: &Plane, mut u1: Plane, mut u2: Plane, opts: &TvL1Options) -> (Plane, Plane) {
    let (w, h) = (i0.w, i0.h);
    let n = w * h;
    let (i1x, i1y) = i1.central_gradient();
    let l_t = opts.lambda * opts.theta;
    let taut = opts.tau / opts.theta;
    // dual variables for the two flow components
    let mut p11 = vec![0.0; n];
    let mut p12 = vec![0.0; n];
    let mut p21 = vec![0.0; n];
    let mut p22 = vec![0.0; n];
    let mut i1w = vec![0.0; n];
    let mut i1wx = vec![0.0; n];
    let mut i1wy = vec![0.0; n];
    let mut grad = vec![0.0; n];
    let mut rho_c = vec![0.0; n];
    let mut v1 = vec![0.0; n];
    let mut v2 = vec![0.0; n];
    let mut div1 = vec![0.0; n];
    let mut div2 = vec![0.0; n];

    for _ in 0..opts.warps {
        for y in 0..h {
            for x in 0..w {
                let k = y * w + x;
                let (xs, ys) = (x as f64 + u1.d[k], y as f64 + u2.d[k]);
                i1w[k] = i1.bilinear(xs, ys);
                i1wx[k] = i1x.bilinear(xs, ys);
                i1wy[k] = i1y.bilinear(xs, ys);
                grad[k] = i1wx[k] * i1wx[k] + i1wy[k] * i1wy[k];
                rho_c[k] = i1w[k] - i1wx[k] * u1.d[k] - i1wy[k] * u2.d[k] - i0.d[k];
            }
        }
        for _ in 0..opts.inner_iterations {
            for k in 0..n {
                let rho = rho_c[k] + i1wx[k] * u1.d[k] + i1wy[k] * u2.d[k];
                let g = grad[k];
                let (d1, d2) = if rho < -l_t * g {
                    (l_t * i1wx[k], l_t * i1wy[k])
                } else if rho > l_t * g {
                    (-l_t * i1wx[k], -l_t * i1wy[k])
                } else if g > 1e-10 {
                    (-rho * i1wx[k] / g, -rho * i1wy[k] / g)
                } else {
                    (0.0, 0.0)
                };
                v1[k] = u1.d[k] + d1;
                v2[k] = u2.d[k] + d2;
            }
            divergence(&p11, &p12, w, h, &mut div1);
            divergence(&p21, &p22, w, h, &mut div2);
            for k in 0..n {
                u1.d[k] = v1[k] + opts.theta * div1[k];
                u2.d[k] = v2[k] + opts.theta * div2[k];
            }
            dual_step(&u1, &mut p11, &mut p12, taut);
            dual_step(&u2, &mut p21, &mut p22, taut);
        }
    }
    (u1, u2)
}

/// Backward-difference divergence, the negative adjoint of the forward
/// gradient used in [`dual_step`].
fn divergence(p1: &[f64], p2: &[f64], w: usize, h: usize, out: &mut [f64]) {
    for y in 0..h {
        for x in 0..w {
            let k = y * w + x;
            let a = if x == 0 {
                p1[k]
            } else if x + 1 == w {
                -p1[k - 1]
            } else {
                p1[k] - p1[k - 1]
            };
            let b = if y == 0 {
                p2[k]
            } else if y + 1 == h {
                -p2[k - w]
            } else {
                p2[k] - p2[k - w]
            };
            out[k] = a + b;
        }
    }
}

fn dual_step(u: &Plane, p1: &mut [f64], p2: &mut [f64], taut: f64) {
    let (w, h) = (u.w, u.h);
    for y in 0..h {
        for x in 0..w {
            let k = y * w + x;
            let gx = if x + 1 < w { u.d[k + 1] - u.d[k] } else { 0.0 };
            let gy = if y + 1 < h { u.d[k + w] - u.d[k] } else { 0.0 };
            let norm = 1.0 + taut * (gx * gx + gy * gy).sqrt();
            p1[k] = (p1[k] + taut * gx) / norm;
            p2[k] = (p2[k] + taut * gy) / norm;
        }
    }
}

/// Bilinear interpolation of the flow at a continuous pixel position.
/// Positions in the last half-open pixel interval reuse the border sample.
pub fn sample_flow(f: &FlowField2D, at: PixelCoord) -> Result<(f64, f64)> {
    let (w, h) = (f.width, f.height);
    if !(at.u >= 0.0 && at.v >= 0.0 && at.u < w as f64 && at.v < h as f64) {
        return Err(Error::OutOfBounds {
            u: at.u,
            v: at.v,
            width: w,
            height: h,
        });
    }
    Ok(sample_clamped(f, at.u, at.v))
}

#[inline]
pub(crate) fn sample_clamped(f: &FlowField2D, x: f64, y: f64) -> (f64, f64) {
    let (w, h) = (f.width, f.height);
    let x = x.clamp(0.0, (w - 1) as f64);
    let y = y.clamp(0.0, (h - 1) as f64);
    let x0 = (x.floor() as usize).min(w - 1);
    let y0 = (y.floor() as usize).min(h - 1);
    let x1 = (x0 + 1).min(w - 1);
    let y1 = (y0 + 1).min(h - 1);
    let (fx, fy) = (x - x0 as f64, y - y0 as f64);
    let lerp = |c: &[f64]| {
        let top = c[y0 * w + x0] + fx * (c[y0 * w + x1] - c[y0 * w + x0]);
        let bottom = c[y1 * w + x0] + fx * (c[y1 * w + x1] - c[y1 * w + x0]);
        top + fy * (bottom - top)
    };
    (lerp(&f.u), lerp(&f.v))
}

/// Smooth pseudo-random texture in `[0, 1]`: a seeded sum of sinusoids.
/// Periodic with period `width` x `height` so circular shifts stay smooth.
pub fn smooth_texture(width: usize, height: usize, seed: u64) -> GrayImage {
    use rand::{Rng, SeedableRng};
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
    let waves: Vec<(f64, f64, f64, f64)> = (0..12)
        .map(|_| {
            let kx = rng.random_range(1..=10) as f64;
            let ky = rng.random_range(1..=10) as f64 * if rng.random_bool(0.5) { 1.0 } else { -1.0 };
            (kx, ky, rng.random_range(0.0..std::f64::consts::TAU), rng.random_range(0.3..1.0))
        })
        .collect();
    let total: f64 = waves.iter().map(|w| w.3).sum();
    let mut data = Vec::with_capacity(width * height);
    for y in 0..height {
        for x in 0..width {
            let (fx, fy) = (x as f64 / width as f64, y as f64 / height as f64);
            let s: f64 = waves
                .iter()
                .map(|(kx, ky, ph, a)| a * (std::f64::consts::TAU * (kx * fx + ky * fy) + ph).sin())
                .sum();
            data.push(0.5 + 0.5 * s / total);
        }
    }
    GrayImage {
        width,
        height,
        data,
    }
}

/// Circular shift: output pixel `(x, y)` takes input `(x - dx, y - dy)`.
pub fn circular_shift(img: &GrayImage, dx: isize, dy: isize) -> GrayImage {
    let (w, h) = (img.width as isize, img.height as isize);
    let mut data = vec![0.0; img.data.len()];
    for y in 0..h {
        for x in 0..w {
            let sx = (x - dx).rem_euclid(w);
            let sy = (y - dy).rem_euclid(h);
            data[(y * w + x) as usize] = img.data[(sy * w + sx) as usize];
        }
    }
    GrayImage { data, ..*img }
}
