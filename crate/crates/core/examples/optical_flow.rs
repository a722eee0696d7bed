//! Estimates dense flow between a texture and a shifted copy of it.
//!
//! ```bash
//! cargo run --example optical_flow
//! ```

use lidarcam::flow::{circular_shift, smooth_texture, tv_l1_flow, TvL1Options};

fn main() -> lidarcam::Result<()> {
    let a = smooth_texture(160, 120, 3);
    let b = circular_shift(&a, 2, -1);
    let f = tv_l1_flow(&a, &b, &TvL1Options::default())?;

    let (mut su, mut sv, mut n) = (0.0, 0.0, 0.0);
    for y in 12..f.height - 12 {
        for x in 16..f.width - 16 {
            let (u, v) = f.at(x, y);
            su += u;
            sv += v;
            n += 1.0;
        }
    }
    println!("true shift (2, -1), mean estimate ({:.3}, {:.3})", su / n, sv / n);
    Ok(())
}
