//! 64-point fixed-point FFT.
//!
//! Radix-2 decimation in time, six stages, each stage scaled by 1/2 and
//! rounded half away from zero, so the output is the DFT divided by 64.

use crate::frame::{bin_of, FFT_LEN};
use crate::numerics::{IqSample, TWIDDLES};

/// 64 frequency-domain values addressed by subcarrier index.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct FreqSymbol {
    bins: [IqSample; FFT_LEN],
}

impl Default for FreqSymbol {
    fn default() -> Self {
        FreqSymbol { bins: [IqSample::ZERO; FFT_LEN] }
    }
}

impl FreqSymbol {
    /// Wraps values given in FFT bin order.
    pub fn from_bins(bins: [IqSample; FFT_LEN]) -> Self {
        FreqSymbol { bins }
    }

    pub fn from_subcarriers(mut f: impl FnMut(i32) -> IqSample) -> Self {
        let mut s = FreqSymbol::default();
        for k in -32..32 {
            s.bins[bin_of(k)] = f(k);
        }
        s
    }

    pub fn bins(&self) -> &[IqSample; FFT_LEN] {
        &self.bins
    }

    #[inline]
    pub fn at(&self, k: i32) -> IqSample {
        self.bins[bin_of(k)]
    }

    #[inline]
    pub fn set(&mut self, k: i32, v: IqSample) {
        self.bins[bin_of(k)] = v;
    }
}

const fn bit_reverse_table() -> [usize; FFT_LEN] {
    let mut t = [0; FFT_LEN];
    let mut i = 0;
    while i < FFT_LEN {
        t[i] = ((i as u8).reverse_bits() >> 2) as usize;
        i += 1;
    }
    t
}

static BIT_REVERSE: [usize; FFT_LEN] = bit_reverse_table();

const STAGES: usize = 6;

// Row 2s and 2s+1 hold the real and imaginary parts of the 2^s twiddles of
// stage s: W_64^(k·32/2^s).
const fn stage_twiddles() -> [[i32; FFT_LEN / 2]; 2 * STAGES] {
    let mut t = [[0; FFT_LEN / 2]; 2 * STAGES];
    let mut s = 0;
    while s < STAGES {
        let half = 1 << s;
        let mut k = 0;
        while k < half {
            let (wr, wi) = TWIDDLES[k * (FFT_LEN / 2 / half)];
            t[2 * s][k] = wr as i32;
            t[2 * s + 1][k] = wi as i32;
            k += 1;
        }
        s += 1;
    }
    t
}

static STAGE_TWIDDLES: [[i32; FFT_LEN / 2]; 2 * STAGES] = stage_twiddles();

/// `sat16(round_shift((a << 15) + t, 16))` without widening.
///
/// |t| <= 32768·46341 < 2^31 since |wr| + |wi| <= 46341 for every twiddle,
/// and `a` is a 16-bit value.
#[inline(always)]
fn half_add(a: i32, t: i32) -> i32 {
    let v = a + (t >> 15);
    let up = ((t & 0x7fff != 0) | (v >= 0)) as i32;
    ((v + up) >> 1).clamp(i16::MIN as i32, i16::MAX as i32)
}

#[inline(always)]
fn stage<const H: usize>(re: &mut [i32; FFT_LEN], im: &mut [i32; FFT_LEN], wr: &[i32; 32], wi: &[i32; 32]) {
    for g in (0..FFT_LEN).step_by(2 * H) {
        for j in 0..H {
            let (a, b) = (g + j, g + H + j);
            let tr = re[b] * wr[j] - im[b] * wi[j];
            let ti = re[b] * wi[j] + im[b] * wr[j];
            let (ar, ai) = (re[a], im[a]);
            re[a] = half_add(ar, tr);
            im[a] = half_add(ai, ti);
            re[b] = half_add(ar, -tr);
            im[b] = half_add(ai, -ti);
        }
    }
}

/// Forward transform of one 64-sample window.
pub fn fft64(time: &[IqSample; FFT_LEN]) -> FreqSymbol {
    let mut re = [0i32; FFT_LEN];
    let mut im = [0i32; FFT_LEN];
    for (n, &src) in BIT_REVERSE.iter().enumerate() {
        re[n] = time[src].re as i32;
        im[n] = time[src].im as i32;
    }
    let w = &STAGE_TWIDDLES;
    stage::<1>(&mut re, &mut im, &w[0], &w[1]);
    stage::<2>(&mut re, &mut im, &w[2], &w[3]);
    stage::<4>(&mut re, &mut im, &w[4], &w[5]);
    stage::<8>(&mut re, &mut im, &w[6], &w[7]);
    stage::<16>(&mut re, &mut im, &w[8], &w[9]);
    stage::<32>(&mut re, &mut im, &w[10], &w[11]);
    FreqSymbol { bins: std::array::from_fn(|k| IqSample::new(re[k] as i16, im[k] as i16)) }
}
