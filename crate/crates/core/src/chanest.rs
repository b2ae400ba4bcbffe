//! Channel estimation from the long training fields.

use crate::fft64::FreqSymbol;
use crate::frame::{active_indices, bin_of, Format, FFT_LEN};
use crate::numerics::{div_round, round_shift, sat16, IqSample};
use crate::txref::{htltf_sign, lltf_sign};

/// Per-subcarrier channel estimate, zero outside the active set.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Csi {
    h: [IqSample; FFT_LEN],
    active_mask: [bool; FFT_LEN],
    pub format: Format,
    pub smoothed: bool,
}

impl Csi {
    fn empty(format: Format) -> Self {
        let mut active_mask = [false; FFT_LEN];
        for k in active_indices(format) {
            active_mask[bin_of(k)] = true;
        }
        Csi { h: [IqSample::ZERO; FFT_LEN], active_mask, format, smoothed: false }
    }

    /// Builds an estimate from `f(k)` on the active subcarriers.
    pub fn from_fn(format: Format, mut f: impl FnMut(i32) -> IqSample) -> Self {
        let mut c = Csi::empty(format);
        for k in active_indices(format) {
            c.h[bin_of(k)] = f(k);
        }
        c
    }

    #[inline]
    pub fn at(&self, k: i32) -> IqSample {
        self.h[bin_of(k)]
    }

    #[inline]
    pub fn is_active(&self, k: i32) -> bool {
        self.active_mask[bin_of(k)]
    }

    /// Values in FFT bin order.
    pub fn bins(&self) -> &[IqSample; FFT_LEN] {
        &self.h
    }

    pub fn active_mask(&self) -> &[bool; FFT_LEN] {
        &self.active_mask
    }
}

/// H[i] = ((X₁[i] + X₂[i]) / 2) · L[i] over the 52 legacy subcarriers.
pub fn estimate_legacy(sym1: &FreqSymbol, sym2: &FreqSymbol) -> Csi {
    Csi::from_fn(Format::Legacy, |k| {
        let (a, b) = (sym1.at(k), sym2.at(k));
        let avg = IqSample::new(
            round_shift(a.re as i64 + b.re as i64, 1) as i16,
            round_shift(a.im as i64 + b.im as i64, 1) as i16,
        );
        avg.signed(lltf_sign(k))
    })
}

/// H[i] = X[i] · HT[i] over the 56 HT subcarriers.
pub fn estimate_ht(sym: &FreqSymbol) -> Csi {
    Csi::from_fn(Format::Ht, |k| sym.at(k).signed(htltf_sign(k)))
}

/// Three-point moving average across the active subcarriers in index order,
/// treating ±1 as neighbours across DC; the two band edges average over two.
pub fn smooth(csi: &Csi) -> Csi {
    let idx: Vec<i32> = active_indices(csi.format).collect();
    let mut out = *csi;
    for (n, &k) in idx.iter().enumerate() {
        let lo = n.saturating_sub(1);
        let hi = (n + 1).min(idx.len() - 1);
        let (mut re, mut im) = (0i64, 0i64);
        for &j in &idx[lo..=hi] {
            re += csi.at(j).re as i64;
            im += csi.at(j).im as i64;
        }
        let len = (hi - lo + 1) as i64;
        out.h[bin_of(k)] = IqSample::new(sat16(div_round(re, len)), sat16(div_round(im, len)));
    }
    out.smoothed = true;
    out
}
