//! Reference sequences from IEEE 802.11 (clauses 17 and 19, 20 MHz).

use crate::frame::{bin_of, FFT_LEN};
use num_complex::Complex64;

/// L-LTF values for subcarriers −26..=26.
pub const LLTF: [i8; 53] = [
    1, 1, -1, -1, 1, 1, -1, 1, -1, 1, 1, 1, 1, 1, 1, -1, -1, 1, 1, -1, 1, -1, 1, 1, 1, 1, //
    0, //
    1, -1, -1, 1, 1, -1, 1, -1, 1, -1, -1, -1, -1, -1, 1, 1, -1, -1, 1, -1, 1, -1, 1, 1, 1, 1,
];

/// Non-zero L-STF subcarriers as (index, sign); each carries sign·(1+j)·√(13/6).
pub const LSTF: [(i32, i8); 12] = [
    (-24, 1),
    (-20, -1),
    (-16, 1),
    (-12, -1),
    (-8, -1),
    (-4, 1),
    (4, -1),
    (8, -1),
    (12, 1),
    (16, 1),
    (20, 1),
    (24, 1),
];

/// Pilot values at −21, −7, 7, 21 before polarity.
pub const PILOT_BASE: [i8; 4] = [1, 1, 1, -1];

/// Length of the pilot polarity sequence.
pub const POLARITY_PERIOD: usize = 127;

// Output of the x^7 + x^4 + 1 scrambler from the all-ones state, mapped 0 → +1, 1 → −1.
const fn polarity_table() -> [i8; POLARITY_PERIOD] {
    let mut out = [0i8; POLARITY_PERIOD];
    let mut state: u8 = 0x7f;
    let mut n = 0;
    while n < POLARITY_PERIOD {
        let bit = ((state >> 6) ^ (state >> 3)) & 1;
        state = ((state << 1) | bit) & 0x7f;
        out[n] = if bit == 0 { 1 } else { -1 };
        n += 1;
    }
    out
}

pub static POLARITY: [i8; POLARITY_PERIOD] = polarity_table();

/// Polarity for the `n`-th tracked symbol (cyclic).
#[inline]
pub fn polarity(n: usize) -> i8 {
    POLARITY[n % POLARITY_PERIOD]
}

/// L-LTF sign at subcarrier `k`, 0 outside −26..=26 and at DC.
pub fn lltf_sign(k: i32) -> i8 {
    if (-26..=26).contains(&k) {
        LLTF[(k + 26) as usize]
    } else {
        0
    }
}

/// HT-LTF sign at subcarrier `k`: the L-LTF extended by {1, 1} and {−1, −1}.
pub fn htltf_sign(k: i32) -> i8 {
    match k {
        -28 | -27 => 1,
        27 | 28 => -1,
        _ => lltf_sign(k),
    }
}

/// L-STF frequency-domain value at subcarrier `k`.
pub fn lstf_value(k: i32) -> Complex64 {
    let amp = (13.0f64 / 6.0).sqrt();
    LSTF.iter()
        .find(|(i, _)| *i == k)
        .map(|&(_, s)| Complex64::new(s as f64, s as f64) * amp)
        .unwrap_or_default()
}

/// The reference tables gathered in FFT bin order.
#[derive(Debug, Clone)]
pub struct RefSequences {
    pub lstf_freq: [Complex64; FFT_LEN],
    pub lltf_sign: [i8; FFT_LEN],
    pub htltf_sign: [i8; FFT_LEN],
    pub pilot_base: [i8; 4],
    pub polarity_seq: [i8; POLARITY_PERIOD],
}

impl RefSequences {
    pub fn new() -> Self {
        let mut r = RefSequences {
            lstf_freq: [Complex64::default(); FFT_LEN],
            lltf_sign: [0; FFT_LEN],
            htltf_sign: [0; FFT_LEN],
            pilot_base: PILOT_BASE,
            polarity_seq: POLARITY,
        };
        for k in -32..32 {
            r.lstf_freq[bin_of(k)] = lstf_value(k);
            r.lltf_sign[bin_of(k)] = lltf_sign(k);
            r.htltf_sign[bin_of(k)] = htltf_sign(k);
        }
        r
    }
}

impl Default for RefSequences {
    fn default() -> Self {
        Self::new()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    // Pilot polarity sequence as printed in the standard.
    const PRINTED: [i8; 127] = [
        1, 1, 1, 1, -1, -1, -1, 1, -1, -1, -1, -1, 1, 1, -1, 1, -1, -1, 1, 1, -1, 1, 1, -1, 1, 1,
        1, 1, 1, 1, -1, 1, 1, 1, -1, 1, 1, -1, -1, 1, 1, 1, -1, 1, -1, -1, -1, 1, -1, 1, -1, -1,
        1, -1, -1, 1, 1, 1, 1, 1, -1, -1, 1, 1, -1, -1, 1, -1, 1, -1, 1, 1, -1, -1, -1, 1, 1, -1,
        -1, -1, -1, 1, -1, -1, 1, -1, 1, 1, 1, 1, -1, 1, -1, 1, -1, 1, -1, -1, -1, -1, -1, 1, -1,
        1, 1, -1, 1, -1, 1, 1, 1, -1, -1, 1, -1, -1, -1, 1, 1, 1, -1, -1, -1, -1, -1, -1, -1,
    ];

    #[test]
    fn polarity_matches_printed_table() {
        assert_eq!(POLARITY, PRINTED);
        assert_eq!(polarity(0), 1);
        assert_eq!(polarity(4), -1);
        assert_eq!(polarity(127), polarity(0));
    }

    #[test]
    fn ltf_signs_are_unit_on_active_set() {
        for k in -26..=26 {
            assert_eq!(lltf_sign(k).abs(), if k == 0 { 0 } else { 1 });
        }
        for k in -28..=28 {
            assert_eq!(htltf_sign(k).abs(), if k == 0 { 0 } else { 1 });
        }
        assert_eq!(lltf_sign(27), 0);
        assert_eq!(htltf_sign(29), 0);
    }

    #[test]
    fn stf_occupies_every_fourth_subcarrier() {
        let power: f64 = (-32..32).map(|k| lstf_value(k).norm_sqr()).sum();
        // 12 tones at |(1+j)·√(13/6)|² = 13/3 each → 52, same as 52 unit tones
        assert!((power - 52.0).abs() < 1e-12);
        for k in -32..32 {
            if lstf_value(k).norm() > 0.0 {
                assert_eq!(k.rem_euclid(4), 0);
            }
        }
    }
}
