//! Writes and reads back the KITTI-style files the crate understands.
//!
//! ```bash
//! cargo run --example kitti_io
//! ```

use lidarcam::geometry::{CalibParams, Intrinsics, Point3, PointCloud};
use lidarcam::io;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let dir = std::env::temp_dir().join("lidarcam_kitti_io");
    std::fs::create_dir_all(&dir)?;

    let cloud = PointCloud::new(vec![Point3::new(5.0, 1.0, -0.5), Point3::new(12.0, -3.0, 0.8)]);
    io::write_velodyne_bin(dir.join("0000000000.bin"), &cloud)?;
    let back = io::read_velodyne_bin(dir.join("0000000000.bin"))?;
    println!("velodyne: {} points, first {:?}", back.len(), back.points[0]);

    let theta = CalibParams::from_degrees_meters([-90.0, 0.5, -90.0, 0.06, -0.08, -0.27]);
    let k = Intrinsics::new(721.5, 721.5, 609.6, 172.9, 1242, 375)?;
    io::write_kitti_calib(dir.join("calib.txt"), &theta, &k)?;
    let calib = io::read_kitti_calib(dir.join("calib.txt"))?;
    let (theta_back, k_back) = io::kitti_to_params(&calib)?;
    println!("calibration (deg, m): {:.4?}", theta_back.to_degrees_meters());
    println!("intrinsics: fx {} cx {} cy {} size {}x{}", k_back.fx, k_back.cx, k_back.cy, k_back.width, k_back.height);
    Ok(())
}
