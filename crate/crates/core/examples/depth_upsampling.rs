//! Densifies the projected LiDAR depth of a synthetic frame and compares it
//! with the rendered ground truth.
//!
//! ```bash
//! cargo run --example depth_upsampling
//! ```

use std::time::Instant;

use lidarcam::synth::{generate, sparse_depth_of, SceneSpec};
use lidarcam::upsample::{upsample, UpsampleOptions};

fn main() -> lidarcam::Result<()> {
    let spec = SceneSpec {
        frames: 2,
        ..SceneSpec::with_seed(5)
    };
    let (seq, gt) = generate(&spec)?;
    let sparse = sparse_depth_of(&seq, 0, &gt.theta);
    let n = sparse.width() * sparse.height();
    println!("{}x{} frame, {:.1}% supported", sparse.width(), sparse.height(), 100.0 * sparse.support_len() as f64 / n as f64);

    let start = Instant::now();
    let res = upsample(&sparse, &UpsampleOptions::default())?;
    println!("{} iterations in {:.2} s", res.iterations, start.elapsed().as_secs_f64());

    let truth = &gt.depth[0];
    let mut errs: Vec<f64> = (0..n)
        .filter(|&i| truth.mask()[i] && !sparse.mask()[i])
        .map(|i| (res.depth.depth[i] - truth.depth()[i]).abs())
        .collect();
    errs.sort_by(f64::total_cmp);
    println!(
        "error on {} held-out pixels: median {:.3} m, p90 {:.3} m",
        errs.len(),
        errs[errs.len() / 2],
        errs[errs.len() * 9 / 10]
    );
    Ok(())
}
