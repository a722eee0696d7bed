//! Generates a synthetic sequence and writes it as a frames directory.
//!
//! ```bash
//! cargo run --example synthetic_scene -- /tmp/scene
//! ```

use lidarcam::io::write_frames_dir;
use lidarcam::synth::{generate, SceneSpec};

fn main() -> lidarcam::Result<()> {
    let out = std::env::args().nth(1).unwrap_or_else(|| "synthetic_scene".into());
    let spec = SceneSpec {
        frames: 4,
        noise_sigma: 0.02,
        ..SceneSpec::with_seed(11)
    };
    let (seq, gt) = generate(&spec)?;
    for (l, f) in seq.frames.iter().enumerate() {
        println!("frame {l}: t = {:.2} s, {} points", f.timestamp, f.cloud.len());
    }
    println!("true extrinsics (deg, m): {:?}", gt.theta.to_degrees_meters());
    write_frames_dir(&out, &seq, &gt.theta)?;
    println!("wrote {out}");
    Ok(())
}
