//! Maps a handful of LiDAR points into the image of a pinhole camera and
//! back again.
//!
//! ```bash
//! cargo run --example project_points
//! ```

use lidarcam::geometry::{back_project, project, transform_points, Intrinsics, Point3, PointCloud, RigidTransform};
use nalgebra::{Matrix3, Vector3};

fn main() -> lidarcam::Result<()> {
    // LiDAR x forward, y left, z up; camera z forward, x right, y down.
    let axes = Matrix3::new(0.0, -1.0, 0.0, 0.0, 0.0, -1.0, 1.0, 0.0, 0.0);
    let theta = RigidTransform {
        rotation: axes,
        translation: Vector3::new(0.0, -0.08, -0.27),
    }
    .to_params();
    println!("extrinsics (deg, m): {:.2?}", theta.to_degrees_meters());
    let k = Intrinsics::new(721.5, 721.5, 609.6, 172.9, 1242, 375)?;

    let cloud = PointCloud::new(vec![
        Point3::new(10.0, 0.0, 0.0),
        Point3::new(15.0, 3.0, -1.2),
        Point3::new(8.0, -2.5, 0.4),
        Point3::new(-5.0, 0.0, 0.0),
    ]);
    let cam = transform_points(&theta, &cloud);
    for (lidar, c) in cloud.points.iter().zip(&cam.points) {
        match project(&k, c) {
            Some(px) => {
                let back = back_project(&k, px, c.z);
                println!(
                    "lidar ({:6.2}, {:6.2}, {:6.2}) -> pixel ({:7.2}, {:6.2}) at depth {:5.2} m, reprojection error {:.1e}",
                    lidar.x,
                    lidar.y,
                    lidar.z,
                    px.u,
                    px.v,
                    c.z,
                    (back - c).norm()
                );
            }
            None => println!("lidar ({:6.2}, {:6.2}, {:6.2}) -> not visible", lidar.x, lidar.y, lidar.z),
        }
    }
    Ok(())
}
