//! Dense depth from a sparse reprojected depth map by minimizing the
//! anisotropic l1 norm of the forward-difference gradient subject to
//! equality on the supported pixels.
//!
//! Maps are stored column-major: pixel `(row, col)` lives at
//! `col * height + row`, so `Dx` strides by `height` and `Dy` by one.
//!
//! The default step uses the gradient of the Moreau envelope of the
//! objective at step `gamma`, which turns the accelerated loop into an
//! accelerated proximal point method. Each proximal step is a TV denoising
//! problem with fixed pixels, solved on its dual by FISTA and stopped on the
//! duality gap. The literal sign subgradient step is available through
//! [`StepRule::Subgradient`].

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct SparseDepthMap {
    width: usize,
    height: usize,
    depth: Vec<f64>,
    mask: Vec<bool>,
}

impl SparseDepthMap {
    /// `depth` and `mask` are column-major. Unsupported depths are stored as 0.
    pub fn new(width: usize, height: usize, mut depth: Vec<f64>, mask: Vec<bool>) -> Result<Self> {
        let n = width * height;
        if depth.len() != n || mask.len() != n {
            return Err(Error::dims(n, format!("{}/{}", depth.len(), mask.len())));
        }
        for (d, m) in depth.iter_mut().zip(&mask) {
            if *m {
                if !(d.is_finite() && *d > 0.0) {
                    return Err(Error::InvalidArgument(format!(
                        "supported depth must be positive and finite, got {d}"
                    )));
                }
            } else {
                *d = 0.0;
            }
        }
        Ok(SparseDepthMap {
            width,
            height,
            depth,
            mask,
        })
    }

    /// Builds a map where every positive finite value is a measurement.
    pub fn from_values(width: usize, height: usize, depth: Vec<f64>) -> Result<Self> {
        let mask = depth.iter().map(|d| d.is_finite() && *d > 0.0).collect();
        SparseDepthMap::new(width, height, depth, mask)
    }

    pub fn empty(width: usize, height: usize) -> Self {
        SparseDepthMap {
            width,
            height,
            depth: vec![0.0; width * height],
            mask: vec![false; width * height],
        }
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn depth(&self) -> &[f64] {
        &self.depth
    }

    pub fn mask(&self) -> &[bool] {
        &self.mask
    }

    #[inline]
    pub fn index(&self, row: usize, col: usize) -> usize {
        col * self.height + row
    }

    pub fn get(&self, row: usize, col: usize) -> Option<f64> {
        let n = self.index(row, col);
        self.mask[n].then_some(self.depth[n])
    }

    /// Records a measurement, keeping the nearer one if the pixel is taken.
    pub fn insert_nearest(&mut self, row: usize, col: usize, depth: f64) {
        let n = self.index(row, col);
        if depth > 0.0 && depth.is_finite() && (!self.mask[n] || depth < self.depth[n]) {
            self.depth[n] = depth;
            self.mask[n] = true;
        }
    }

    pub fn support_len(&self) -> usize {
        self.mask.iter().filter(|m| **m).count()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DenseDepthMap {
    pub width: usize,
    pub height: usize,
    /// Column-major.
    pub depth: Vec<f64>,
}

impl DenseDepthMap {
    pub fn new(width: usize, height: usize, depth: Vec<f64>) -> Result<Self> {
        if depth.len() != width * height {
            return Err(Error::dims(width * height, depth.len()));
        }
        Ok(DenseDepthMap {
            width,
            height,
            depth,
        })
    }

    pub fn constant(width: usize, height: usize, value: f64) -> Self {
        DenseDepthMap {
            width,
            height,
            depth: vec![value; width * height],
        }
    }

    #[inline]
    pub fn get(&self, row: usize, col: usize) -> f64 {
        self.depth[col * self.height + row]
    }
}

/// Forward differences `(Dx x, Dy x)`, zero on the last column / row.
pub fn gradient(x: &DenseDepthMap) -> (Vec<f64>, Vec<f64>) {
    let n = x.depth.len();
    let mut gx = vec![0.0; n];
    let mut gy = vec![0.0; n];
    apply_d(&x.depth, x.height, x.width, &mut gx, &mut gy);
    (gx, gy)
}

/// Adjoint of [`gradient`]: `Dxᵀ u + Dyᵀ v`.
pub fn gradient_adjoint(width: usize, height: usize, u: &[f64], v: &[f64]) -> Vec<f64> {
    let mut out = vec![0.0; width * height];
    apply_dt(u, v, height, width, &mut out);
    out
}

pub fn objective_f(x: &DenseDepthMap) -> f64 {
    tv(&x.depth, x.height, x.width)
}

pub fn soft_threshold(v: &[f64], tau: f64) -> Vec<f64> {
    v.iter().map(|&x| shrink(x, tau)).collect()
}

#[inline]
fn shrink(x: f64, tau: f64) -> f64 {
    if tau == 0.0 {
        x
    } else {
        x.signum() * (x.abs() - tau).max(0.0)
    }
}

fn apply_d(x: &[f64], ny: usize, nx: usize, gx: &mut [f64], gy: &mut [f64]) {
    for c in 0..nx {
        let col = &x[c * ny..(c + 1) * ny];
        let gyc = &mut gy[c * ny..(c + 1) * ny];
        for r in 0..ny - 1 {
            gyc[r] = col[r + 1] - col[r];
        }
        gyc[ny - 1] = 0.0;
        let gxc = &mut gx[c * ny..(c + 1) * ny];
        if c + 1 < nx {
            let next = &x[(c + 1) * ny..(c + 2) * ny];
            for r in 0..ny {
                gxc[r] = next[r] - col[r];
            }
        } else {
            gxc.fill(0.0);
        }
    }
}

fn apply_dt(u: &[f64], v: &[f64], ny: usize, nx: usize, out: &mut [f64]) {
    for c in 0..nx {
        for r in 0..ny {
            let n = c * ny + r;
            let mut ax = 0.0;
            if c + 1 < nx {
                ax -= u[n];
            }
            if c > 0 {
                ax += u[n - ny];
            }
            let mut ay = 0.0;
            if r + 1 < ny {
                ay -= v[n];
            }
            if r > 0 {
                ay += v[n - 1];
            }
            out[n] = ax + ay;
        }
    }
}

fn tv(x: &[f64], ny: usize, nx: usize) -> f64 {
    let mut total = 0.0;
    for c in 0..nx {
        let col = &x[c * ny..(c + 1) * ny];
        let mut s = 0.0;
        for r in 0..ny - 1 {
            s += (col[r + 1] - col[r]).abs();
        }
        if c + 1 < nx {
            let next = &x[(c + 1) * ny..(c + 2) * ny];
            for r in 0..ny {
                s += (next[r] - col[r]).abs();
            }
        }
        total += s;
    }
    total
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum InitFill {
    /// Value of the nearest supported pixel in the city-block metric, ties
    /// averaged.
    Nearest,
    Zero,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum StepRule {
    /// Gradient of the Moreau envelope, i.e. an exact-up-to-tolerance
    /// proximal step.
    Proximal,
    /// `Dxᵀ sgn(Dx s) + Dyᵀ sgn(Dy s)` with `sgn(0) = 0`.
    Subgradient,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct UpsampleOptions {
    pub gamma: f64,
    /// Soft threshold applied to unsupported pixels after each step, meters.
    pub tau: f64,
    pub max_iters: usize,
    pub stop_rel_tol: f64,
    pub init: InitFill,
    pub step: StepRule,
    /// Inner duality gap target at outer iteration `t` is
    /// `prox_tol * f(s0) / t^3`.
    pub prox_tol: f64,
    pub prox_max_iters: usize,
}

impl Default for UpsampleOptions {
    fn default() -> Self {
        UpsampleOptions {
            gamma: 0.1,
            tau: 0.0,
            max_iters: 400,
            stop_rel_tol: 1e-5,
            init: InitFill::Nearest,
            step: StepRule::Proximal,
            prox_tol: 1e-2,
            prox_max_iters: 1000,
        }
    }
}

impl UpsampleOptions {
    pub fn validate(&self) -> Result<()> {
        if !(self.gamma > 0.0 && self.gamma.is_finite()) {
            return Err(Error::InvalidArgument("gamma must be positive".into()));
        }
        if !(self.tau >= 0.0 && self.tau.is_finite()) {
            return Err(Error::InvalidArgument("tau must be nonnegative".into()));
        }
        if !(self.stop_rel_tol >= 0.0) || !(self.prox_tol > 0.0) {
            return Err(Error::InvalidArgument("tolerances must be positive".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Upsampled {
    pub depth: DenseDepthMap,
    /// Objective of each iterate, meters.
    pub cost_trace: Vec<f64>,
    pub iterations: usize,
    pub inner_iterations: usize,
}

/// Fill of unsupported pixels from the nearest supported ones.
pub fn nearest_fill(y: &SparseDepthMap) -> Result<DenseDepthMap> {
    let (ny, nx) = (y.height, y.width);
    if y.support_len() == 0 {
        return Err(Error::EmptySupport);
    }
    let n = ny * nx;
    let mut dist = vec![usize::MAX; n];
    let mut value = vec![0.0; n];
    let mut frontier: Vec<usize> = Vec::new();
    for k in 0..n {
        if y.mask[k] {
            dist[k] = 0;
            value[k] = y.depth[k];
            frontier.push(k);
        }
    }
    let mut level = 0;
    while !frontier.is_empty() {
        level += 1;
        let mut next = Vec::new();
        for &k in &frontier {
            let (c, r) = (k / ny, k % ny);
            let mut visit = |m: usize| {
                if dist[m] == usize::MAX {
                    dist[m] = level;
                    next.push(m);
                }
            };
            if c > 0 {
                visit(k - ny);
            }
            if c + 1 < nx {
                visit(k + ny);
            }
            if r > 0 {
                visit(k - 1);
            }
            if r + 1 < ny {
                visit(k + 1);
            }
        }
        // average over all neighbours one step closer, summed in mirrored
        // pairs so that flipping the input flips the output exactly
        for &k in &next {
            let (c, r) = (k / ny, k % ny);
            let pick = |m: usize| (dist[m] == level - 1).then(|| value[m]);
            let left = if c > 0 { pick(k - ny) } else { None };
            let right = if c + 1 < nx { pick(k + ny) } else { None };
            let up = if r > 0 { pick(k - 1) } else { None };
            let down = if r + 1 < ny { pick(k + 1) } else { None };
            let pair = |a: Option<f64>, b: Option<f64>| match (a, b) {
                (Some(a), Some(b)) => (a + b, 2.0),
                (Some(a), None) | (None, Some(a)) => (a, 1.0),
                (None, None) => (0.0, 0.0),
            };
            let (sh, nh) = pair(left, right);
            let (sv, nv) = pair(up, down);
            value[k] = (sh + sv) / (nh + nv);
        }
        frontier = next;
    }
    DenseDepthMap::new(nx, ny, value)
}

/// Dual FISTA state for the proximal subproblem
/// `min_x  F(x) + |x - s|² / (2 gamma)` over maps equal to `y` on the support.
///
/// Relies on `s` already agreeing with `y` on the support, so the projected
/// primal point is `s - gamma * free * Dᵀp` with `free` the indicator of the
/// unsupported pixels. Dual entries on the last row / column stay zero.
struct Prox {
    ny: usize,
    nx: usize,
    free: Vec<f64>,
    px: Vec<f64>,
    py: Vec<f64>,
    qx: Vec<f64>,
    qy: Vec<f64>,
    x: Vec<f64>,
    cur: Vec<f64>,
    next: Vec<f64>,
}

/// Duality gap is evaluated every this many dual steps.
const GAP_EVERY: usize = 5;

impl Prox {
    fn new(ny: usize, nx: usize, mask: &[bool]) -> Self {
        let z = vec![0.0; ny * nx];
        Prox {
            ny,
            nx,
            free: mask.iter().map(|m| if *m { 0.0 } else { 1.0 }).collect(),
            px: z.clone(),
            py: z.clone(),
            qx: z.clone(),
            qy: z.clone(),
            x: z,
            cur: vec![0.0; ny],
            next: vec![0.0; ny],
        }
    }

    /// Column `c` of `s - gamma * free * Dᵀ(u, v)`.
    #[inline]
    fn primal_col(&self, u: &[f64], v: &[f64], s: &[f64], gamma: f64, c: usize, out: &mut [f64]) {
        let ny = self.ny;
        let span = c * ny..(c + 1) * ny;
        let (uc, vc, sc, fc) = (&u[span.clone()], &v[span.clone()], &s[span.clone()], &self.free[span]);
        if c > 0 {
            let up = &u[(c - 1) * ny..c * ny];
            for r in 0..ny {
                out[r] = up[r] - uc[r] - vc[r];
            }
        } else {
            for r in 0..ny {
                out[r] = -uc[r] - vc[r];
            }
        }
        for r in 1..ny {
            out[r] += vc[r - 1];
        }
        for r in 0..ny {
            out[r] = sc[r] - gamma * fc[r] * out[r];
        }
    }

    /// Primal point of the current dual iterate into `self.x`, and its gap.
    fn primal_and_gap(&mut self, s: &[f64], gamma: f64) -> f64 {
        let (ny, nx) = (self.ny, self.nx);
        let mut x = std::mem::take(&mut self.x);
        let mut col = vec![0.0; ny];
        for c in 0..nx {
            self.primal_col(&self.px, &self.py, s, gamma, c, &mut col);
            x[c * ny..(c + 1) * ny].copy_from_slice(&col);
        }
        let mut gap = 0.0;
        for c in 0..nx {
            let xc = &x[c * ny..(c + 1) * ny];
            let (pxc, pyc) = (&self.px[c * ny..(c + 1) * ny], &self.py[c * ny..(c + 1) * ny]);
            let mut g = 0.0;
            for r in 0..ny - 1 {
                let d = xc[r + 1] - xc[r];
                g += d.abs() - d * pyc[r];
            }
            if c + 1 < nx {
                let xn = &x[(c + 1) * ny..(c + 2) * ny];
                for r in 0..ny {
                    let d = xn[r] - xc[r];
                    g += d.abs() - d * pxc[r];
                }
            }
            gap += g;
        }
        self.x = x;
        gap
    }

    /// One projected dual step from the extrapolated point, then momentum.
    /// Columns are streamed so that `Dᵀq` of column `c + 1` is formed before
    /// column `c` of `q` is overwritten.
    fn step(&mut self, s: &[f64], gamma: f64, sigma: f64, beta: f64) {
        let (ny, nx) = (self.ny, self.nx);
        let mut cur = std::mem::take(&mut self.cur);
        let mut next = std::mem::take(&mut self.next);
        self.primal_col(&self.qx, &self.qy, s, gamma, 0, &mut cur);
        for c in 0..nx {
            let last = c + 1 == nx;
            if !last {
                self.primal_col(&self.qx, &self.qy, s, gamma, c + 1, &mut next);
            }
            let span = c * ny..(c + 1) * ny;
            let (px, qx) = (&mut self.px[span.clone()], &mut self.qx[span.clone()]);
            if !last {
                for r in 0..ny {
                    let np = (qx[r] + sigma * (next[r] - cur[r])).clamp(-1.0, 1.0);
                    qx[r] = np + beta * (np - px[r]);
                    px[r] = np;
                }
            }
            let (py, qy) = (&mut self.py[span.clone()], &mut self.qy[span]);
            for r in 0..ny - 1 {
                let np = (qy[r] + sigma * (cur[r + 1] - cur[r])).clamp(-1.0, 1.0);
                qy[r] = np + beta * (np - py[r]);
                py[r] = np;
            }
            std::mem::swap(&mut cur, &mut next);
        }
        self.cur = cur;
        self.next = next;
    }

    /// Runs dual FISTA from the current dual point until the gap drops to
    /// `tol` or `cap` steps. Leaves the primal solution in `self.x`.
    fn solve(&mut self, s: &[f64], gamma: f64, tol: f64, cap: usize) -> usize {
        let sigma = 1.0 / (8.0 * gamma);
        self.qx.copy_from_slice(&self.px);
        self.qy.copy_from_slice(&self.py);
        let mut t = 1.0f64;
        let mut steps = 0;
        loop {
            if steps % GAP_EVERY == 0 || steps >= cap {
                let gap = self.primal_and_gap(s, gamma);
                if gap <= tol || steps >= cap {
                    return steps;
                }
            }
            let tn = 0.5 * (1.0 + (1.0 + 4.0 * t * t).sqrt());
            let beta = (t - 1.0) / tn;
            t = tn;
            self.step(s, gamma, sigma, beta);
            steps += 1;
        }
    }
}

fn subgradient_step(s: &[f64], ny: usize, nx: usize, gamma: f64, out: &mut [f64]) {
    let n = s.len();
    let mut gx = vec![0.0; n];
    let mut gy = vec![0.0; n];
    apply_d(s, ny, nx, &mut gx, &mut gy);
    let sgn = |v: f64| if v > 0.0 { 1.0 } else if v < 0.0 { -1.0 } else { 0.0 };
    gx.iter_mut().for_each(|v| *v = sgn(*v));
    gy.iter_mut().for_each(|v| *v = sgn(*v));
    apply_dt(&gx, &gy, ny, nx, out);
    for (o, s) in out.iter_mut().zip(s) {
        *o = s - gamma * *o;
    }
}

/// Accelerated reconstruction. Depths are divided by the largest supported
/// depth internally so the result scales with the input.
pub fn upsample(y: &SparseDepthMap, opts: &UpsampleOptions) -> Result<Upsampled> {
    opts.validate()?;
    let (ny, nx) = (y.height, y.width);
    let support = y.support_len();
    if support == 0 {
        return Err(Error::EmptySupport);
    }
    if support == ny * nx {
        let depth = DenseDepthMap::new(nx, ny, y.depth.clone())?;
        let f = objective_f(&depth);
        return Ok(Upsampled {
            depth,
            cost_trace: vec![f],
            iterations: 0,
            inner_iterations: 0,
        });
    }
    let scale = y
        .depth
        .iter()
        .zip(&y.mask)
        .filter(|(_, m)| **m)
        .map(|(d, _)| *d)
        .fold(0.0, f64::max);
    let yn: Vec<f64> = y.depth.iter().map(|d| d / scale).collect();
    let tau = opts.tau / scale;
    let mask = &y.mask;

    let mut s = match opts.init {
        InitFill::Nearest => nearest_fill(y)?.depth.iter().map(|d| d / scale).collect(),
        InitFill::Zero => yn.clone(),
    };
    let f0 = tv(&s, ny, nx);
    // every iterate satisfies the constraints; hand back the cheapest one
    let mut best = (f0, s.clone());
    let mut z_prev = s.clone();
    let mut z = vec![0.0; s.len()];
    let mut q = 1.0f64;
    let mut prox = Prox::new(ny, nx, mask);
    let mut trace = Vec::new();
    let mut inner = 0;
    let mut prev_cost = f64::INFINITY;
    let mut iterations = 0;

    for t in 1..=opts.max_iters {
        iterations = t;
        match opts.step {
            StepRule::Proximal => {
                let tol = opts.prox_tol * f0 / (t as f64).powi(3);
                inner += prox.solve(&s, opts.gamma, tol, opts.prox_max_iters);
                z.copy_from_slice(&prox.x);
            }
            StepRule::Subgradient => subgradient_step(&s, ny, nx, opts.gamma, &mut z),
        }
        for ((zv, yv), m) in z.iter_mut().zip(&yn).zip(mask) {
            *zv = if *m { *yv } else { shrink(*zv, tau) };
        }
        let qn = 0.5 * (1.0 + (1.0 + 4.0 * q * q).sqrt());
        let lambda = (q - 1.0) / qn;
        q = qn;
        for k in 0..s.len() {
            s[k] = if mask[k] {
                yn[k]
            } else {
                (1.0 + lambda) * z[k] - lambda * z_prev[k]
            };
        }
        std::mem::swap(&mut z, &mut z_prev);
        let cost = tv(&z_prev, ny, nx);
        trace.push(cost * scale);
        if cost < best.0 {
            best.0 = cost;
            best.1.copy_from_slice(&z_prev);
        }
        if prev_cost.is_finite() && (prev_cost - cost).abs() <= opts.stop_rel_tol * cost.max(prev_cost) {
            break;
        }
        prev_cost = cost;
    }

    let depth = best
        .1
        .iter()
        .zip(&y.depth)
        .zip(mask)
        .map(|((z, d), m)| if *m { *d } else { z * scale })
        .collect();
    Ok(Upsampled {
        depth: DenseDepthMap::new(nx, ny, depth)?,
        cost_trace: trace,
        iterations,
        inner_iterations: inner,
    })
}
