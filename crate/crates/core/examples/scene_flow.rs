//! Solves a small assignment problem, then matches two point clouds to get
//! per-point 3D displacements.
//!
//! ```bash
//! cargo run --example scene_flow
//! ```

use lidarcam::assign::{scene_flow, solve_assignment, CostMatrix, SceneFlowOptions, DEFAULT_TOLERANCE};
use lidarcam::geometry::{Point3, PointCloud};
use nalgebra::Vector3;

fn main() -> lidarcam::Result<()> {
    let c = CostMatrix::from_rows(&[vec![4.0, 1.0, 3.0], vec![2.0, 0.0, 5.0], vec![3.0, 2.0, 2.0]])?;
    let a = solve_assignment(&c, DEFAULT_TOLERANCE)?;
    println!("assignment {:?}, total cost {}", a.matches, a.total_cost(&c));

    // a 2 m wide box face shifted by 0.4 m along x
    let mut pts = Vec::new();
    for i in 0..10 {
        for j in 0..10 {
            pts.push(Point3::new(10.0, -1.0 + 0.2 * i as f64, 0.2 * j as f64));
        }
    }
    let src = PointCloud::new(pts.clone());
    let shift = Vector3::new(0.4, 0.0, 0.0);
    let dst = PointCloud::new(pts.iter().map(|p| p + shift).collect());

    let opts = SceneFlowOptions {
        voxel_size: 0.0,
        ..Default::default()
    };
    let flow = scene_flow(&src, &dst, &opts)?;
    let mean = flow
        .displacement
        .iter()
        .zip(&flow.valid)
        .filter(|(_, v)| **v)
        .fold(Vector3::zeros(), |acc, (d, _)| acc + d)
        / flow.valid_count() as f64;
    println!(
        "{} of {} points matched, mean displacement ({:.3}, {:.3}, {:.3})",
        flow.valid_count(),
        flow.len(),
        mean.x,
        mean.y,
        mean.z
    );
    Ok(())
}
