#![allow(dead_code)]

pub mod lp;

use lidarcam::upsample::SparseDepthMap;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Random grid of at most 8x8 with at least one supported pixel and
/// depths in `[1, 20)` m.
pub fn random_grid(seed: u64) -> SparseDepthMap {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (w, h) = (rng.random_range(2..=8), rng.random_range(2..=8));
    let density = rng.random_range(0.05..0.6);
    let mut depth = vec![0.0; w * h];
    let mut mask = vec![false; w * h];
    for k in 0..w * h {
        if rng.random_bool(density) {
            mask[k] = true;
            depth[k] = rng.random_range(1.0..20.0);
        }
    }
    if !mask.iter().any(|m| *m) {
        let k = rng.random_range(0..w * h);
        mask[k] = true;
        depth[k] = rng.random_range(1.0..20.0);
    }
    SparseDepthMap::new(w, h, depth, mask).unwrap()
}

pub fn lp_optimum(y: &SparseDepthMap) -> f64 {
    lp::tv_interpolation_optimum(y.width(), y.height(), y.depth(), y.mask())
}

/// Least-squares slope of `ln gap` against `ln k`, over the entries of
/// `trace` (iteration k is index k - 1) with `k` in `ks` and a gap above
/// `floor`. `None` when fewer than two points remain.
pub fn loglog_slope(trace: &[f64], optimum: f64, ks: std::ops::RangeInclusive<usize>, floor: f64) -> Option<f64> {
    let pts: Vec<(f64, f64)> = ks
        .filter(|k| *k >= 1 && *k <= trace.len())
        .filter_map(|k| {
            let gap = trace[k - 1] - optimum;
            (gap > floor).then(|| ((k as f64).ln(), gap.ln()))
        })
        .collect();
    if pts.len() < 2 {
        return None;
    }
    let n = pts.len() as f64;
    let (mx, my) = pts.iter().fold((0.0, 0.0), |a, p| (a.0 + p.0 / n, a.1 + p.1 / n));
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    Some(sxy / sxx)
}
