use lidarcam::assign::SceneFlow3D;
use lidarcam::calib::lidar_motion_to_image;
use lidarcam::flow::{sample_flow, tv_l1_flow, TvL1Options};
use lidarcam::geometry::{rotation_x, rotation_y, rotation_z, CalibParams, Intrinsics, Point3};
use lidarcam::synth::{generate, sparse_depth_of, GroundTruth, SceneSpec};
use nalgebra::Vector3;

fn small(seed: u64) -> SceneSpec {
    SceneSpec {
        frames: 3,
        n_static_points: 6000,
        intrinsics: Intrinsics::new(130.0, 130.0, 80.0, 60.0, 160, 120).unwrap(),
        ..SceneSpec::with_seed(seed)
    }
}

/// Pinhole projection written out from the rotation factors.
fn project_by_hand(theta: &CalibParams, k: &Intrinsics, p: &Vector3<f64>) -> Option<(f64, f64)> {
    let r = rotation_z(theta.yaw) * rotation_y(theta.pitch) * rotation_x(theta.roll);
    let c = r * p + Vector3::new(theta.tx, theta.ty, theta.tz);
    if c.z < 0.1 {
        return None;
    }
    let (u, v) = (k.fx * c.x / c.z + k.cx, k.fy * c.y / c.z + k.cy);
    (u >= 0.0 && v >= 0.0 && u < k.width as f64 && v < k.height as f64).then_some((u, v))
}

fn truth_flow(gt: &GroundTruth, l: usize) -> SceneFlow3D {
    let n = gt.clean_clouds[l].len();
    SceneFlow3D {
        source: gt.clean_clouds[l].clone(),
        displacement: gt.point_flow[l].clone(),
        valid: vec![true; n],
        matches: vec![None; n],
    }
}

#[test]
fn reprojected_motion_matches_projection_differences() {
    let (seq, gt) = generate(&small(4)).unwrap();
    let k = seq.intrinsics;
    let sf = truth_flow(&gt, 0);
    let got = lidar_motion_to_image(&gt.theta, &k, &sf);
    let expected: Vec<(f64, f64, f64, f64)> = sf
        .source
        .points
        .iter()
        .zip(&sf.displacement)
        .filter_map(|(p, d)| {
            let a = project_by_hand(&gt.theta, &k, &p.coords)?;
            let b = project_by_hand(&gt.theta, &k, &(p.coords + d))?;
            Some((a.0, a.1, b.0 - a.0, b.1 - a.1))
        })
        .collect();
    assert_eq!(got.len(), expected.len());
    assert!(got.iter().any(|(_, m)| m.norm() > 1.0));
    for ((px, m), e) in got.iter().zip(&expected) {
        assert!((px.u - e.0).abs() < 1e-9 && (px.v - e.1).abs() < 1e-9);
        assert!((m.x - e.2).abs() < 1e-9 && (m.y - e.3).abs() < 1e-9);
    }
}

#[test]
fn camera_flow_follows_true_point_motion() {
    for seed in [1, 2] {
        let (seq, gt) = generate(&SceneSpec { frames: 2, ..SceneSpec::with_seed(seed) }).unwrap();
        let flow = tv_l1_flow(&seq.frames[0].image, &seq.frames[1].image, &TvL1Options::default()).unwrap();
        let mut angles: Vec<f64> = lidar_motion_to_image(&gt.theta, &seq.intrinsics, &truth_flow(&gt, 0))
            .into_iter()
            .filter(|(_, m)| m.norm() > 0.5)
            .filter_map(|(px, m)| {
                let (u, v) = sample_flow(&flow, px).ok()?;
                let c = nalgebra::Vector2::new(u, v);
                (c.norm() > 0.05).then(|| (c.dot(&m) / (c.norm() * m.norm())).clamp(-1.0, 1.0).acos().to_degrees())
            })
            .collect();
        assert!(angles.len() > 100, "only {} moving samples", angles.len());
        angles.sort_by(f64::total_cmp);
        let median = angles[angles.len() / 2];
        assert!(median < 15.0, "seed {seed}: median angular error {median} deg");
    }
}

#[test]
fn sparse_depth_agrees_with_splatted_truth() {
    let (seq, gt) = generate(&small(6)).unwrap();
    for l in 0..seq.frames.len() {
        let sparse = sparse_depth_of(&seq, l, &gt.theta);
        assert!(sparse.support_len() > 1000);
        for c in 0..sparse.width() {
            for r in 0..sparse.height() {
                if let Some(d) = sparse.get(r, c) {
                    let t = gt.depth[l].get(r, c).expect("truth covers every hit pixel");
                    // noise-free spec: returned and clean clouds coincide
                    assert!((d - t).abs() < 1e-6);
                }
            }
        }
    }
}

#[test]
fn cloud_behind_camera_has_no_support() {
    let (mut seq, gt) = generate(&small(8)).unwrap();
    for p in &mut seq.frames[0].cloud.points {
        *p = Point3::new(p.x, p.y, -p.z.abs() - 1.0);
    }
    assert_eq!(sparse_depth_of(&seq, 0, &gt.theta).support_len(), 0);
}
