use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::CalibParams;

/// One normalized unit along an angle axis, radians (20 degrees).
pub const ANGLE_SCALE: f64 = 20.0 * std::f64::consts::PI / 180.0;
/// One normalized unit along a translation axis, meters.
pub const TRANSLATION_SCALE: f64 = 2.0;

const SCALES: [f64; 6] = [
    ANGLE_SCALE,
    ANGLE_SCALE,
    ANGLE_SCALE,
    TRANSLATION_SCALE,
    TRANSLATION_SCALE,
    TRANSLATION_SCALE,
];
const DIM: usize = 6;

const REFLECT: f64 = 1.0;
const EXPAND: f64 = 2.0;
const CONTRACT: f64 = 0.5;
const SHRINK: f64 = 0.5;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SimplexOptions {
    pub init: CalibParams,
    /// Always `dim + 1 = 7`; kept explicit so configurations are self-describing.
    pub n_vertices: usize,
    /// Vertex offsets are drawn from `[0.5, 1] * init_spread` normalized units.
    pub init_spread: f64,
    pub max_iters: usize,
    /// Largest normalized coordinate distance from the best vertex.
    pub x_tol: f64,
    /// Largest cost difference from the best vertex.
    pub f_tol: f64,
    pub rng_seed: u64,
    /// Restart once from the best vertex when the first run ends above this cost.
    pub restart_threshold: Option<f64>,
}

impl Default for SimplexOptions {
    fn default() -> Self {
        SimplexOptions {
            init: CalibParams::ZERO,
            n_vertices: DIM + 1,
            init_spread: 0.2,
            max_iters: 600,
            x_tol: 1e-4,
            f_tol: 1e-6,
            rng_seed: 0,
            restart_threshold: None,
        }
    }
}

impl SimplexOptions {
    pub fn validate(&self) -> Result<()> {
        if self.n_vertices != DIM + 1 {
            return Err(Error::InvalidArgument(format!(
                "simplex needs {} vertices, got {}",
                DIM + 1,
                self.n_vertices
            )));
        }
        if !(self.init_spread > 0.0) || !self.init.is_finite() {
            return Err(Error::InvalidArgument("simplex spread must be positive and init finite".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimplexResult {
    pub theta: CalibParams,
    pub cost: f64,
    pub iterations: usize,
    pub evaluations: usize,
    /// Best cost before the first iteration and after every iteration.
    pub trace: Vec<f64>,
    pub converged: bool,
    pub restarted: bool,
}

type Vertex = [f64; DIM];

fn to_params(z: &Vertex) -> CalibParams {
    CalibParams::from_array(std::array::from_fn(|i| z[i] * SCALES[i]))
}

fn to_normalized(p: &CalibParams) -> Vertex {
    let a = p.to_array();
    std::array::from_fn(|i| a[i] / SCALES[i])
}

fn affine(a: &Vertex, b: &Vertex, t: f64) -> Vertex {
    std::array::from_fn(|i| a[i] + t * (b[i] - a[i]))
}

struct Run<'a, F> {
    f: &'a mut F,
    evaluations: usize,
}

impl<F: FnMut(&CalibParams) -> f64> Run<'_, F> {
    fn eval(&mut self, z: &Vertex) -> f64 {
        self.evaluations += 1;
        let v = (self.f)(&to_params(z));
        if v.is_finite() {
            v
        } else {
            f64::INFINITY
        }
    }

    fn initial(&mut self, center: &Vertex, spread: f64, rng: &mut ChaCha8Rng) -> Result<Vec<(Vertex, f64)>> {
        let mut out = Vec::with_capacity(DIM + 1);
        for v in 0..=DIM {
            let mut z = *center;
            if v > 0 {
                let sign = if rng.random_bool(0.5) { 1.0 } else { -1.0 };
                z[v - 1] += sign * rng.random_range(0.5..=1.0) * spread;
            }
            self.evaluations += 1;
            let fv = (self.f)(&to_params(&z));
            if !fv.is_finite() {
                return Err(Error::NonFiniteObjective { vertex: v });
            }
            out.push((z, fv));
        }
        Ok(out)
    }
}

fn sort(s: &mut [(Vertex, f64)]) {
    s.sort_by(|a, b| a.1.total_cmp(&b.1));
}

fn converged(s: &[(Vertex, f64)], opts: &SimplexOptions) -> bool {
    let (best, fbest) = (&s[0].0, s[0].1);
    let dx = s[1..]
        .iter()
        .flat_map(|(z, _)| z.iter().zip(best).map(|(a, b)| (a - b).abs()))
        .fold(0.0, f64::max);
    let df = s[1..].iter().map(|(_, f)| (f - fbest).abs()).fold(0.0, f64::max);
    dx <= opts.x_tol && df <= opts.f_tol
}

/// One Nelder-Mead step with reflection, expansion, contraction and shrink
/// coefficients 1, 2, 1/2, 1/2. `s` must be sorted on entry.
fn step<F: FnMut(&CalibParams) -> f64>(run: &mut Run<'_, F>, s: &mut [(Vertex, f64)]) {
    let n = DIM;
    let centroid: Vertex = std::array::from_fn(|i| s[..n].iter().map(|(z, _)| z[i]).sum::<f64>() / n as f64);
    let worst = s[n].0;
    let (f1, fn_, fworst) = (s[0].1, s[n - 1].1, s[n].1);

    let xr = affine(&centroid, &worst, -REFLECT);
    let fr = run.eval(&xr);
    if fr < f1 {
        let xe = affine(&centroid, &worst, -REFLECT * EXPAND);
        let fe = run.eval(&xe);
        s[n] = if fe < fr { (xe, fe) } else { (xr, fr) };
    } else if fr < fn_ {
        s[n] = (xr, fr);
    } else {
        let contracted = if fr < fworst {
            let xc = affine(&centroid, &xr, CONTRACT);
            let fc = run.eval(&xc);
            (fc <= fr).then_some((xc, fc))
        } else {
            let xc = affine(&centroid, &worst, CONTRACT);
            let fc = run.eval(&xc);
            (fc < fworst).then_some((xc, fc))
        };
        match contracted {
            Some(v) => s[n] = v,
            None => {
                let best = s[0].0;
                for v in s[1..].iter_mut() {
                    v.0 = affine(&best, &v.0, SHRINK);
                    v.1 = run.eval(&v.0);
                }
            }
        }
    }
    sort(s);
}

/// Derivative-free minimization over the six calibration parameters.
///
/// Vertices live in normalized coordinates (angles over [`ANGLE_SCALE`],
/// translations over [`TRANSLATION_SCALE`]). The initial simplex is `init`
/// plus one signed, randomly scaled offset per axis. Non-finite costs after
/// initialization are treated as `+inf`.
pub fn nelder_mead<F>(mut f: F, opts: &SimplexOptions) -> Result<SimplexResult>
where
    F: FnMut(&CalibParams) -> f64,
{
    opts.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(opts.rng_seed);
    let mut run = Run {
        f: &mut f,
        evaluations: 0,
    };
    let mut simplex = run.initial(&to_normalized(&opts.init), opts.init_spread, &mut rng)?;
    sort(&mut simplex);
    let mut trace = vec![simplex[0].1];
    let mut iterations = 0;
    let mut restarted = false;
    let mut done;
    loop {
        done = converged(&simplex, opts);
        while !done && iterations < opts.max_iters {
            step(&mut run, &mut simplex);
            iterations += 1;
            trace.push(simplex[0].1);
            done = converged(&simplex, opts);
        }
        let above = opts.restart_threshold.is_some_and(|t| simplex[0].1 > t);
        if restarted || !above || iterations >= opts.max_iters {
            break;
        }
        restarted = true;
        simplex = run.initial(&simplex[0].0, opts.init_spread, &mut rng)?;
        sort(&mut simplex);
    }
    let (best, cost) = simplex[0];
    Ok(SimplexResult {
        theta: to_params(&best),
        cost,
        iterations,
        evaluations: run.evaluations,
        trace,
        converged: done,
        restarted,
    })
}
