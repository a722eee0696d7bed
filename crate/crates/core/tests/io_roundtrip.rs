use std::fs;

use lidarcam::calib::FrameSequence;
use lidarcam::flow::{FlowField2D, GrayImage};
use lidarcam::geometry::{project, rotation_x, rotation_y, rotation_z, CalibParams, Intrinsics, Point3, PointCloud};
use lidarcam::io::*;
use lidarcam::synth::{generate, SceneSpec};
use lidarcam::upsample::{DenseDepthMap, SparseDepthMap};
use nalgebra::{Matrix3, Vector3};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn row(v: &[f64]) -> String {
    v.iter().map(|x| format!("{x:e}")).collect::<Vec<_>>().join(" ")
}

fn params(rng: &mut ChaCha8Rng) -> CalibParams {
    CalibParams::new(
        rng.random_range(-3.0..3.0),
        rng.random_range(-1.4..1.4),
        rng.random_range(-3.0..3.0),
        rng.random_range(-2.0..2.0),
        rng.random_range(-2.0..2.0),
        rng.random_range(-2.0..2.0),
    )
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn velodyne_is_bit_identical(seed in any::<u64>(), n in 0usize..300) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let cloud = PointCloud {
            points: (0..n)
                .map(|_| Point3::new(
                    rng.random_range(-80.0f32..80.0) as f64,
                    rng.random_range(-80.0f32..80.0) as f64,
                    rng.random_range(-3.0f32..3.0) as f64,
                ))
                .collect(),
            reflectance: (0..n).map(|_| rng.random_range(0.0f32..1.0)).collect(),
        };
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("c.bin");
        write_velodyne_bin(&p, &cloud).unwrap();
        prop_assert_eq!(fs::metadata(&p).unwrap().len() as usize, 16 * n);
        prop_assert_eq!(read_velodyne_bin(&p).unwrap(), cloud);
    }

    #[test]
    fn calibration_file_round_trips(seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let theta = params(&mut rng);
        let k = Intrinsics::new(rng.random_range(200.0..900.0), rng.random_range(200.0..900.0), 310.5, 188.25, 640, 376).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("calib.txt");
        write_kitti_calib(&p, &theta, &k).unwrap();
        let (back, kb) = kitti_to_params(&read_kitti_calib(&p).unwrap()).unwrap();
        prop_assert_eq!(kb, k);
        for (a, b) in back.difference(&theta).iter().zip([1.0; 6]) {
            prop_assert!(a.abs() < 1e-9 * b);
        }
    }

    #[test]
    fn depth_png_quantization_is_bounded(seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let (w, h) = (rng.random_range(1..40), rng.random_range(1..40));
        let depth: Vec<f64> = (0..w * h).map(|_| if rng.random_bool(0.3) { rng.random_range(0.01..250.0) } else { 0.0 }).collect();
        let map = SparseDepthMap::from_values(w, h, depth).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("d.png");
        write_depth_png16(&p, &map).unwrap();
        let back = read_depth_png16(&p).unwrap();
        prop_assert_eq!(back.mask(), map.mask());
        for (a, b) in back.depth().iter().zip(map.depth()) {
            // values below one unit are lifted to one unit so support survives
            prop_assert!((a - b).abs() <= 1.0 / 512.0 || (*b < 1.0 / 256.0 && *a == 1.0 / 256.0));
        }
    }

    #[test]
    fn raw_planes_round_trip_in_single_precision(seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let (w, h) = (rng.random_range(1..30), rng.random_range(1..30));
        let u: Vec<f64> = (0..w * h).map(|_| rng.random_range(-20.0..20.0)).collect();
        let v: Vec<f64> = (0..w * h).map(|_| rng.random_range(-20.0..20.0)).collect();
        let f = FlowField2D::new(w, h, u, v).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("f.bin");
        write_flow(&p, &f).unwrap();
        let back = read_flow(&p).unwrap();
        for (a, b) in back.u.iter().chain(&back.v).zip(f.u.iter().chain(&f.v)) {
            prop_assert_eq!(*a, *b as f32 as f64);
        }
        let d = DenseDepthMap::new(w, h, f.u.iter().map(|x| x.abs() + 1.0).collect()).unwrap();
        write_depth_raw(&p, &d).unwrap();
        let back = read_depth_raw(&p).unwrap();
        for (a, b) in back.depth.iter().zip(&d.depth) {
            prop_assert_eq!(*a, *b as f32 as f64);
        }
    }

    #[test]
    fn gray_png_round_trips_to_16_bits(seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let (w, h) = (rng.random_range(1..30), rng.random_range(1..30));
        let img = GrayImage::new(w, h, (0..w * h).map(|_| rng.random_range(0.0..=1.0)).collect()).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("g.png");
        write_image_gray(&p, &img).unwrap();
        let back = read_image_gray(&p).unwrap();
        for (a, b) in back.data().iter().zip(img.data()) {
            prop_assert!((a - b).abs() <= 0.5 / 65535.0 + 1e-15);
        }
    }
}

/// Projection through the raw KITTI chain `P * R_rect * [R | T]`.
fn kitti_chain(r: &Matrix3<f64>, t: &Vector3<f64>, rect: &Matrix3<f64>, p: &[f64; 12], x: &Vector3<f64>) -> (f64, f64) {
    let c = rect * (r * x + t);
    let h = [
        p[0] * c.x + p[1] * c.y + p[2] * c.z + p[3],
        p[4] * c.x + p[5] * c.y + p[6] * c.z + p[7],
        p[8] * c.x + p[9] * c.y + p[10] * c.z + p[11],
    ];
    (h[0] / h[2], h[1] / h[2])
}

#[test]
fn raw_layout_composes_rectification_and_baseline() {
    let r = rotation_z(0.02) * rotation_y(-1.55) * rotation_x(1.5);
    let t = Vector3::new(-0.004, -0.076, -0.27);
    let rect = rotation_x(0.005) * rotation_y(-0.003);
    let p = [721.5, 0.0, 609.6, 44.86, 0.0, 721.5, 172.9, 0.2164, 0.0, 0.0, 1.0, 0.002746];
    let dir = tempfile::tempdir().unwrap();
    let mat = |m: &Matrix3<f64>| row(m.transpose().as_slice());
    fs::write(
        dir.path().join("calib_velo_to_cam.txt"),
        format!("calib_time: 15-Mar-2012 11:37:16\nR: {}\nT: {}\ndelta_f: 0 0\n", mat(&r), row(t.as_slice())),
    )
    .unwrap();
    fs::write(
        dir.path().join("calib_cam_to_cam.txt"),
        format!(
            "calib_time: 09-Jan-2012 13:57:47\ncorner_dist: 9.95e-02\nS_rect_00: 1.242000e+03 3.750000e+02\nR_rect_00: {}\nP_rect_00: {}\nS_rect_02: 1.242000e+03 3.750000e+02\nR_rect_02: {}\nP_rect_02: {}\n",
            mat(&Matrix3::identity()),
            row(&[1.0, 0.0, 0.0, 0.0, 0.0, 1.0, 0.0, 0.0, 0.0, 0.0, 1.0, 0.0]),
            mat(&rect),
            row(&p)
        ),
    )
    .unwrap();
    let (theta, k) = kitti_to_params(&read_kitti_calib_camera(dir.path(), 2).unwrap()).unwrap();
    assert_eq!((k.width, k.height), (1242, 375));
    let tf = theta.to_transform();
    for x in [Vector3::new(10.0, 1.0, -0.5), Vector3::new(25.0, -4.0, 1.0), Vector3::new(6.0, 2.0, 0.0)] {
        let (u, v) = kitti_chain(&r, &t, &rect, &p, &x);
        let px = project(&k, &tf.apply(&Point3::from(x))).unwrap();
        assert!((px.u - u).abs() < 1e-9 && (px.v - v).abs() < 1e-9, "({}, {}) vs ({u}, {v})", px.u, px.v);
    }
}

#[test]
fn odometry_layout_is_accepted() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("calib.txt");
    let p0 = "7.188560e+02 0 6.071928e+02 0 0 7.188560e+02 1.852157e+02 0 0 0 1 0";
    fs::write(
        &path,
        format!("P0: {p0}\nP1: {p0}\nP2: {p0}\nP3: {p0}\nTr: 0 -1 0 0.1 0 0 -1 0.2 1 0 0 0.3\n"),
    )
    .unwrap();
    let mut c = read_kitti_calib(&path).unwrap();
    assert_eq!(c.rectification, Matrix3::identity());
    c.image_size = Some((1241, 376));
    let (theta, k) = kitti_to_params(&c).unwrap();
    assert_eq!(k.fx, 718.856);
    let tf = theta.to_transform();
    let x = tf.apply(&Point3::new(10.0, 0.0, 0.0));
    assert!((x - Point3::new(0.1, 0.2, 10.3)).norm() < 1e-9);
}

#[test]
fn frame_directory_round_trips() {
    let spec = SceneSpec {
        frames: 3,
        n_static_points: 2000,
        intrinsics: Intrinsics::new(60.0, 60.0, 40.0, 30.0, 80, 60).unwrap(),
        ..SceneSpec::with_seed(2)
    };
    let (seq, gt) = generate(&spec).unwrap();
    let dir = tempfile::tempdir().unwrap();
    write_frames_dir(dir.path(), &seq, &gt.theta).unwrap();
    let (back, theta): (FrameSequence, CalibParams) = read_frames_dir_with_calib(dir.path()).unwrap();
    assert_eq!(back.intrinsics, seq.intrinsics);
    assert!(theta.difference(&gt.theta).iter().all(|d| d.abs() < 1e-12));
    assert_eq!(back.frames.len(), 3);
    for (a, b) in back.frames.iter().zip(&seq.frames) {
        assert_eq!(a.timestamp, b.timestamp);
        assert_eq!(a.cloud.len(), b.cloud.len());
        for (p, q) in a.cloud.points.iter().zip(&b.cloud.points) {
            assert!((p - q).norm() < 1e-5);
        }
        for (p, q) in a.image.data().iter().zip(b.image.data()) {
            assert!((p - q).abs() <= 0.5 / 65535.0 + 1e-15);
        }
    }
}

#[test]
fn missing_directory_is_an_io_error() {
    assert!(matches!(
        read_frames_dir("/nonexistent/frames"),
        Err(lidarcam::Error::Io { .. })
    ));
}

#[test]
fn report_is_json() {
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path().join("r.json");
    write_report_json(&p, &serde_json::json!({"cost": 0.5})).unwrap();
    let v: serde_json::Value = serde_json::from_str(&fs::read_to_string(&p).unwrap()).unwrap();
    assert_eq!(v["cost"], 0.5);
}
