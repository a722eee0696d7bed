//! Runs the full self-calibration on a synthetic sequence from a perturbed
//! initial guess.
//!
//! ```bash
//! cargo run --release --example calibrate
//! ```

use lidarcam::calib::{calibrate, CalibOptions};
use lidarcam::geometry::CalibParams;
use lidarcam::synth::{generate, SceneSpec};

fn main() -> lidarcam::Result<()> {
    let (seq, gt) = generate(&SceneSpec::with_seed(7))?;
    let mut init = gt.theta.to_degrees_meters();
    for (v, d) in init.iter_mut().zip([2.0, -2.5, 2.0, 0.2, -0.1, -0.1]) {
        *v += d;
    }
    let opts = CalibOptions {
        init: CalibParams::from_degrees_meters(init),
        ground_truth: Some(gt.theta),
        ..Default::default()
    };
    let report = calibrate(&seq, &opts)?;
    println!("estimate (deg, m): {:.3?}", report.theta_deg_m);
    println!("error    (deg, m): {:.3?}", report.error_deg_m.unwrap());
    println!(
        "cost {:.4} after {} iterations, converged: {}",
        report.cost, report.iterations, report.converged
    );
    Ok(())
}
