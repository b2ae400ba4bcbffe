//! Generates the trigonometric and twiddle lookup tables.

use std::f64::consts::PI;
use std::fmt::Write as _;
use std::path::Path;

fn round_away(x: f64) -> i64 {
    // f64::round rounds half away from zero
    x.round() as i64
}

fn main() {
    let mut out = String::new();

    // Quarter-wave sine, 1024 entries over [0, pi/2), amplitude 2^14.
    // Entries k and 1024-k serve as the (sin, cos) pair of the same angle;
    // each pair takes the floor or ceiling of the exact values that keeps
    // sin^2 + cos^2 closest to 2^28 (rounded values win ties).
    let exact = |k: usize| (2.0 * PI * k as f64 / 4096.0).sin() * 16384.0;
    let mut table = [0i64; 1025];
    table[1024] = 16384;
    for a in 0..=512usize {
        let b = 1024 - a;
        let cands = |x: f64| {
            let r = round_away(x);
            let other = if (x - r as f64) >= 0.0 { r + 1 } else { r - 1 };
            [r, other]
        };
        let mut best = (i64::MAX, 0, 0);
        for ta in cands(exact(a)) {
            for tb in cands(exact(b)) {
                let err = (ta * ta + tb * tb - (1 << 28)).abs();
                if err < best.0 {
                    best = (err, ta, tb);
                }
            }
        }
        table[a] = best.1;
        table[b] = best.2;
    }
    table[0] = 0;
    table[1024] = 16384;
    writeln!(out, "pub(crate) const SIN_QUARTER: [i16; 1024] = [").unwrap();
    for (k, v) in table.iter().take(1024).enumerate() {
        write!(out, "{v},").unwrap();
        if k % 16 == 15 {
            out.push('\n');
        }
    }
    writeln!(out, "];").unwrap();

    // atan(k / 255) in phase units (4096 per turn), k = 0..=255.
    writeln!(out, "pub(crate) const ATAN_RATIO: [i16; 256] = [").unwrap();
    for k in 0..256 {
        let v = round_away((k as f64 / 255.0).atan() * 4096.0 * 16.0 / (2.0 * PI));
        write!(out, "{v},").unwrap();
        if k % 16 == 15 {
            out.push('\n');
        }
    }
    writeln!(out, "];").unwrap();

    // FFT twiddles e^{-j 2 pi m / 64}, m = 0..32, Q1.15 saturated.
    writeln!(out, "pub(crate) const TWIDDLES: [(i16, i16); 32] = [").unwrap();
    for m in 0..32 {
        let a = -2.0 * PI * m as f64 / 64.0;
        let re = round_away(a.cos() * 32768.0).clamp(-32768, 32767);
        let im = round_away(a.sin() * 32768.0).clamp(-32768, 32767);
        writeln!(out, "({re}, {im}),").unwrap();
    }
    writeln!(out, "];").unwrap();

    let dest = Path::new(&std::env::var("OUT_DIR").unwrap()).join("tables.rs");
    std::fs::write(dest, out).unwrap();
    println!("cargo:rerun-if-changed=build.rs");
}
