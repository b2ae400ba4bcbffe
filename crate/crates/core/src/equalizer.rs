//! Pilot tracking and zero-forcing equalization.
//!
//! Per symbol: polarity, common phase error from the pilots, pilot
//! correction with the accumulated slope, residual slope regression,
//! per-subcarrier correction, then division by the channel.

use bitflags::bitflags;
use num_complex::Complex64;
use thiserror::Error;

use crate::chanest::Csi;
use crate::fft64::FreqSymbol;
use crate::frame::{bin_of, data_indices, Format, FFT_LEN, PILOT_INDEX_ENERGY, PILOT_INDICES};
use crate::numerics::{atan2_lut, conj_mul, div_round, rotate, round_shift, sat16, IqSample, PhaseWord, WideAcc};
use crate::txref::{polarity, PILOT_BASE, POLARITY_PERIOD};

/// Fractional bits of the slope accumulator (2π/2²⁰ per index unit).
pub const PEG_FRAC_BITS: u32 = 8;
/// |acc_peg| limit: 28 · 4681 units stays inside the 18-bit PhaseWord.
pub const ACC_PEG_LIMIT: i32 = 4681 << PEG_FRAC_BITS;
pub const SXY_MAX: i32 = (1 << 23) - 1;
/// 1.0 in the equalized Q2.14 format.
pub const EQ_ONE: i32 = 1 << 14;

/// Per-subcarrier correction phases, indexed by FFT bin.
pub type SymPhase = [PhaseWord; FFT_LEN];

bitflags! {
    #[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default)]
    pub struct SymbolFlags: u8 {
        /// Pilot sum was zero; CPE taken as 0.
        const DEGENERATE_CPE = 1;
        /// At least one pilot had no defined angle in the slope regression.
        const DEGENERATE_PEG = 1 << 1;
        /// At least one data subcarrier had |H|² = 0.
        const UNEQUALIZABLE = 1 << 2;
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Error)]
pub enum EqError {
    #[error("expected {expected} symbols, got {got}")]
    ShortStream { expected: usize, got: usize },
    #[error("csi format {csi:?} does not match equalizer format {eq:?}")]
    FormatMismatch { csi: Format, eq: Format },
}

/// Equalized value in Q2.14 (unit-power constellations reach ±1.08).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default)]
pub struct EqPoint {
    pub re: i16,
    pub im: i16,
}

impl EqPoint {
    pub const ZERO: EqPoint = EqPoint { re: 0, im: 0 };

    pub fn to_complex(self) -> Complex64 {
        Complex64::new(self.re as f64, self.im as f64) / EQ_ONE as f64
    }
}

/// Tracking state carried from symbol to symbol.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct PilotTrackState {
    /// Index into the polarity sequence of the next symbol.
    pub pol_nr: u8,
    pub current_polarity: [i8; 4],
    /// Accumulated phase slope in 1/256 PhaseWord units per subcarrier index.
    pub acc_peg: i32,
    pub format: Format,
}

impl PilotTrackState {
    pub fn new(format: Format) -> Self {
        PilotTrackState { pol_nr: 0, current_polarity: PILOT_BASE, acc_peg: 0, format }
    }

    /// Switches format; slope and polarity position continue.
    pub fn restart(&mut self, format: Format) {
        self.format = format;
    }
}

/// Pilot values of the current symbol; advances the polarity index.
pub fn get_polarity(state: &mut PilotTrackState) -> [i8; 4] {
    let p = polarity(state.pol_nr as usize);
    state.current_polarity = PILOT_BASE.map(|b| b * p);
    state.pol_nr = ((state.pol_nr as usize + 1) % POLARITY_PERIOD) as u8;
    state.current_polarity
}

/// Σ P[i]·conj(X[i])·H[i] over the pilots.
pub fn pilot_sum(sym: &FreqSymbol, csi: &Csi, pol: &[i8; 4]) -> WideAcc {
    let mut acc = WideAcc::ZERO;
    for (&k, &p) in PILOT_INDICES.iter().zip(pol) {
        acc += conj_mul(sym.at(k), csi.at(k)).signed(p);
    }
    acc
}

/// Common phase error; `None` when the pilot sum vanishes.
pub fn cpe_estimate(sym: &FreqSymbol, csi: &Csi, pol: &[i8; 4]) -> Option<PhaseWord> {
    atan2_lut(pilot_sum(sym, csi, pol))
}

/// Σ i·angle(P[i]·conj(X'[i])·H[i]) with X' the pilot rotated by its
/// `sym_phase` entry, clamped to 24 bits. The flag reports pilots
/// without a defined angle; they contribute 0.
pub fn peg_estimate(sym: &FreqSymbol, sym_phase: &SymPhase, csi: &Csi, pol: &[i8; 4]) -> (i32, bool) {
    let mut sxy = 0i64;
    let mut degenerate = false;
    for (&k, &p) in PILOT_INDICES.iter().zip(pol) {
        let x = rotate(sym.at(k), sym_phase[bin_of(k)]);
        match atan2_lut(conj_mul(x, csi.at(k)).signed(p)) {
            Some(a) => sxy += k as i64 * a.units() as i64,
            None => degenerate = true,
        }
    }
    (sxy.clamp(-(SXY_MAX as i64), SXY_MAX as i64) as i32, degenerate)
}

/// Adds sxy/980 to the slope accumulator and writes cpe + i·acc_peg for the
/// first `length` entries of `indices`. Returns the new accumulator.
pub fn lvpe_correction(
    sym_phase: &mut SymPhase,
    cpe: PhaseWord,
    state: &mut PilotTrackState,
    sxy: i32,
    indices: &[i32],
    length: usize,
) -> i32 {
    let incr = div_round((sxy as i64) << PEG_FRAC_BITS, PILOT_INDEX_ENERGY);
    state.acc_peg = (state.acc_peg as i64 + incr).clamp(-(ACC_PEG_LIMIT as i64), ACC_PEG_LIMIT as i64) as i32;
    let acc = state.acc_peg as i64;
    for &k in &indices[..length] {
        let slope = round_shift(k as i64 * acc, PEG_FRAC_BITS) as i32;
        sym_phase[bin_of(k)] = cpe + PhaseWord::new(slope);
    }
    state.acc_peg
}

/// Zero-forcing division X'·conj(H)/|H|² in Q2.14 for one subcarrier.
#[inline]
pub fn zf_divide(x: IqSample, h: IqSample) -> Option<EqPoint> {
    let den = h.power();
    if den == 0 {
        return None;
    }
    let (xr, xi, hr, hi) = (x.re as i64, x.im as i64, h.re as i64, h.im as i64);
    let nr = (xr * hr + xi * hi) << 14;
    let ni = (xi * hr - xr * hi) << 14;
    let inv = 1.0 / den as f64;
    Some(EqPoint { re: quotient(nr, den, inv), im: quotient(ni, den, inv) })
}

/// sat16(div_round(n, d)) for |n| < 2⁴⁶, 0 < d < 2³², given `inv` ≈ 1/d.
///
/// The float estimate is within one of the rounded quotient; the integer
/// bracket (2q−1)·d ≤ 2|n| < (2q+1)·d then fixes it exactly. Estimates
/// past 32769 saturate either way.
#[inline]
fn quotient(n: i64, d: i64, inv: f64) -> i16 {
    let m = n >> 63;
    let a = n.abs();
    let mut q = (a as f64 * inv + 0.5).min(32769.0) as i64;
    if (2 * q - 1) * d > 2 * a {
        q -= 1;
    } else if (2 * q + 1) * d <= 2 * a {
        q += 1;
    }
    sat16((q ^ m) - m)
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct EqualizedSymbol {
    pub format: Format,
    /// Data subcarriers in ascending index order.
    pub points: Vec<EqPoint>,
    /// Per point: UNEQUALIZABLE when |H|² = 0.
    pub point_flags: Vec<SymbolFlags>,
    pub flags: SymbolFlags,
    pub cpe: PhaseWord,
    pub sxy: i32,
    pub acc_peg: i32,
    /// Polarity index used for this symbol.
    pub pol_nr: u8,
}

/// Rotates each data subcarrier by its `sym_phase` and divides by the channel.
pub fn correct_and_equalize(sym: &FreqSymbol, sym_phase: &SymPhase, csi: &Csi) -> EqualizedSymbol {
    let idx = data_indices(csi.format);
    let mut points = vec![EqPoint::ZERO; idx.len()];
    let mut point_flags = vec![SymbolFlags::empty(); idx.len()];
    let mut flags = SymbolFlags::empty();
    for ((&k, p), f) in idx.iter().zip(&mut points).zip(&mut point_flags) {
        let x = rotate(sym.at(k), sym_phase[bin_of(k)]);
        match zf_divide(x, csi.at(k)) {
            Some(y) => *p = y,
            None => {
                *f = SymbolFlags::UNEQUALIZABLE;
                flags |= SymbolFlags::UNEQUALIZABLE;
            }
        }
    }
    EqualizedSymbol {
        format: csi.format,
        points,
        point_flags,
        flags,
        cpe: PhaseWord::ZERO,
        sxy: 0,
        acc_peg: 0,
        pol_nr: 0,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Tracking {
    Enabled,
    /// CPE and slope forced to zero.
    Disabled,
}

/// One equalizer instance per packet.
#[derive(Debug, Clone)]
pub struct Equalizer {
    pub state: PilotTrackState,
    pub tracking: Tracking,
}

impl Equalizer {
    pub fn new(format: Format, tracking: Tracking) -> Self {
        Equalizer { state: PilotTrackState::new(format), tracking }
    }

    pub fn format(&self) -> Format {
        self.state.format
    }

    pub fn restart(&mut self, format: Format) {
        self.state.restart(format);
    }

    pub fn equalize_symbol(&mut self, sym: &FreqSymbol, csi: &Csi) -> Result<EqualizedSymbol, EqError> {
        if csi.format != self.state.format {
            return Err(EqError::FormatMismatch { csi: csi.format, eq: self.state.format });
        }
        let enabled = self.tracking == Tracking::Enabled;
        let pol_nr = self.state.pol_nr;
        let pol = get_polarity(&mut self.state);
        let mut flags = SymbolFlags::empty();

        let cpe = match cpe_estimate(sym, csi, &pol) {
            Some(c) if enabled => c,
            Some(_) => PhaseWord::ZERO,
            None => {
                flags |= SymbolFlags::DEGENERATE_CPE;
                PhaseWord::ZERO
            }
        };
        if !enabled {
            self.state.acc_peg = 0;
        }

        let mut sym_phase: SymPhase = [PhaseWord::ZERO; FFT_LEN];
        // pilots only
        lvpe_correction(&mut sym_phase, cpe, &mut self.state, 0, &PILOT_INDICES, PILOT_INDICES.len());
        let (sxy, degenerate) = peg_estimate(sym, &sym_phase, csi, &pol);
        if degenerate {
            flags |= SymbolFlags::DEGENERATE_PEG;
        }
        // data
        let idx = data_indices(self.state.format);
        let applied = if enabled { sxy } else { 0 };
        let acc_peg = lvpe_correction(&mut sym_phase, cpe, &mut self.state, applied, idx, idx.len());

        let mut out = correct_and_equalize(sym, &sym_phase, csi);
        out.flags |= flags;
        out.cpe = cpe;
        out.sxy = sxy;
        out.acc_peg = acc_peg;
        out.pol_nr = pol_nr;
        Ok(out)
    }
}

/// Equalizes the first `nof_ofdm_sym` symbols with one CSI.
pub fn equalize_packet(
    eq: &mut Equalizer,
    symbols: &[FreqSymbol],
    csi: &Csi,
    nof_ofdm_sym: usize,
) -> Result<Vec<EqualizedSymbol>, EqError> {
    if symbols.len() < nof_ofdm_sym {
        return Err(EqError::ShortStream { expected: nof_ofdm_sym, got: symbols.len() });
    }
    symbols[..nof_ofdm_sym].iter().map(|s| eq.equalize_symbol(s, csi)).collect()
}

/// Pilot phase left after applying `cpe + i·acc_peg`; `None` for a zero pilot.
pub fn residual_pilot_phase(
    sym: &FreqSymbol,
    csi: &Csi,
    pol: &[i8; 4],
    cpe: PhaseWord,
    acc_peg: i32,
) -> [Option<PhaseWord>; 4] {
    std::array::from_fn(|j| {
        let k = PILOT_INDICES[j];
        let slope = div_round(k as i64 * acc_peg as i64, 1 << PEG_FRAC_BITS) as i32;
        let x = rotate(sym.at(k), cpe + PhaseWord::new(slope));
        atan2_lut(conj_mul(x, csi.at(k)).signed(pol[j]))
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::frame::active_indices;
    use crate::txref::{Modulation, POLARITY};
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use std::f64::consts::TAU;

    fn flat_csi(format: Format, h: IqSample) -> Csi {
        Csi::from_fn(format, |_| h)
    }

    fn random_csi(rng: &mut ChaCha8Rng, format: Format, lo: f64, hi: f64) -> Csi {
        Csi::from_fn(format, |_| {
            IqSample::from_complex(Complex64::from_polar(rng.random_range(lo..hi), rng.random_range(0.0..TAU)))
        })
    }

    /// Received symbol X[i] = e^{jφ(i)}·S[i]·H[i]; pilots carry polarity `pol`.
    fn received(
        csi: &Csi,
        pol: &[i8; 4],
        data: &[Complex64],
        phase: impl Fn(i32) -> f64,
    ) -> FreqSymbol {
        let mut sym = FreqSymbol::default();
        for (&k, &p) in PILOT_INDICES.iter().zip(pol) {
            let v = csi.at(k).to_complex() * p as f64 * Complex64::from_polar(1.0, phase(k));
            sym.set(k, IqSample::from_complex(v));
        }
        for (&k, &d) in data_indices(csi.format).iter().zip(data) {
            let v = csi.at(k).to_complex() * d * Complex64::from_polar(1.0, phase(k));
            sym.set(k, IqSample::from_complex(v));
        }
        sym
    }

    fn random_data(rng: &mut ChaCha8Rng, format: Format, m: Modulation) -> Vec<Complex64> {
        (0..format.data_count()).map(|_| m.point(rng.random_range(0..m.order()))).collect()
    }

    fn units(rad: f64) -> f64 {
        rad * 4096.0 / TAU
    }

    fn wrap_units(u: i32) -> i32 {
        (u + 2048).rem_euclid(4096) - 2048
    }

    #[test]
    fn polarity_examples() {
        let mut s = PilotTrackState::new(Format::Ht);
        assert_eq!(get_polarity(&mut s), [1, 1, 1, -1]);
        s.pol_nr = 4;
        assert_eq!(get_polarity(&mut s), [-1, -1, -1, 1]);
        assert_eq!(s.pol_nr, 5);
        let start = get_polarity(&mut s);
        for _ in 0..126 {
            get_polarity(&mut s);
        }
        assert_eq!(get_polarity(&mut s), start);
    }

    #[test]
    fn polarity_matches_transmitter_for_every_index() {
        let mut s = PilotTrackState::new(Format::Legacy);
        for n in 0..300 {
            let p = get_polarity(&mut s);
            assert_eq!(p, PILOT_BASE.map(|b| b * POLARITY[n % 127]));
        }
    }

    #[test]
    fn cpe_examples() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let csi = random_csi(&mut rng, Format::Ht, 0.05, 0.5);
        let pol = [1, -1, 1, 1];
        let data = vec![Complex64::default(); 52];
        let clean = received(&csi, &pol, &data, |_| 0.0);
        assert_eq!(cpe_estimate(&clean, &csi, &pol), Some(PhaseWord::ZERO));

        let rotated = received(&csi, &pol, &data, |_| 0.2);
        let cpe = cpe_estimate(&rotated, &csi, &pol).unwrap().units();
        assert!((cpe - -130).abs() <= 3, "{cpe}");
        assert!((cpe as f64 - units(-0.2)).abs() <= 3.0);

        let mut one_dead = clean;
        one_dead.set(7, IqSample::ZERO);
        assert!(cpe_estimate(&one_dead, &csi, &pol).unwrap().units().abs() <= 3);

        assert_eq!(cpe_estimate(&FreqSymbol::default(), &csi, &pol), None);
    }

    #[test]
    fn cpe_invariant_to_positive_scaling() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        for _ in 0..500 {
            let csi = random_csi(&mut rng, Format::Legacy, 0.05, 0.3);
            let pol = [1, 1, 1, -1];
            let theta = rng.random_range(-3.0..3.0);
            let noise: Vec<f64> = (0..4).map(|_| rng.random_range(-0.3..0.3)).collect();
            let sym = received(&csi, &pol, &[], |k| {
                theta + noise[PILOT_INDICES.iter().position(|&p| p == k).unwrap_or(0)]
            });
            let scale = rng.random_range(0.2..1.0);
            let scaled = FreqSymbol::from_subcarriers(|k| IqSample::from_complex(sym.at(k).to_complex() * scale));
            let a = cpe_estimate(&sym, &csi, &pol).unwrap().units();
            let b = cpe_estimate(&scaled, &csi, &pol).unwrap().units();
            assert!(wrap_units(a - b).abs() <= 1, "{a} {b}");
        }
    }

    #[test]
    fn peg_examples() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let csi = random_csi(&mut rng, Format::Ht, 0.1, 0.5);
        let pol = [1, 1, 1, -1];
        let zero: SymPhase = [PhaseWord::ZERO; FFT_LEN];

        let clean = received(&csi, &pol, &[], |_| 0.0);
        assert!(peg_estimate(&clean, &zero, &csi, &pol).0.abs() <= 4);

        // residual phase i·φ with φ = 2 units
        let phi = TAU * 2.0 / 4096.0;
        let sloped = received(&csi, &pol, &[], |k| k as f64 * phi);
        let (sxy, degenerate) = peg_estimate(&sloped, &zero, &csi, &pol);
        assert!((sxy - -1960).abs() <= 40, "{sxy}");
        assert!(!degenerate);

        let common = received(&csi, &pol, &[], |_| 0.7);
        assert!(peg_estimate(&common, &zero, &csi, &pol).0.abs() <= 4);

        // The correction is applied before the regression.
        let mut pre = zero;
        for k in PILOT_INDICES {
            pre[bin_of(k)] = PhaseWord::new(-2 * k);
        }
        assert!(peg_estimate(&sloped, &pre, &csi, &pol).0.abs() <= 40);
    }

    proptest! {
        #[test]
        fn quotient_equals_integer_division(
            x in any::<(i16, i16)>(),
            h in any::<(i16, i16)>(),
            n in -(1i64 << 46)..(1i64 << 46),
            d in 1i64..(1 << 31),
        ) {
            prop_assert_eq!(quotient(n, d, 1.0 / d as f64), sat16(div_round(n, d)));
            let (x, h) = (IqSample::new(x.0, x.1), IqSample::new(h.0, h.1));
            let den = h.power();
            if den > 0 {
                let nr = (x.re as i64 * h.re as i64 + x.im as i64 * h.im as i64) << 14;
                prop_assert_eq!(quotient(nr, den, 1.0 / den as f64), sat16(div_round(nr, den)));
            }
        }

        #[test]
        fn quotient_ties_round_away(q in -40000i64..40000, d in 1i64..(1 << 20)) {
            // n/d = q + 1/2 exactly
            let n = (2 * q + 1) * d;
            prop_assert_eq!(quotient(n, 2 * d, 0.5 / d as f64), sat16(div_round(n, 2 * d)));
            prop_assert_eq!(quotient(-n, 2 * d, 0.5 / d as f64), sat16(div_round(-n, 2 * d)));
        }

        #[test]
        fn quotient_tolerates_inexact_reciprocal(n in -(1i64 << 46)..(1i64 << 46), d in 1i64..(1 << 32), ulps in -64i64..64) {
            let inv = f64::from_bits(((1.0 / d as f64).to_bits() as i64 + ulps) as u64);
            prop_assert_eq!(quotient(n, d, inv), sat16(div_round(n, d)));
        }
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]
        // Equal pilot angles: the symmetric index set cancels exactly.
        #[test]
        fn peg_ignores_constant_residual(
            theta in -3.1f64..3.1,
            mag in 0.01f64..0.9,
            arg in -3.1f64..3.1,
            pol in prop::array::uniform4(prop::bool::ANY),
        ) {
            let pol = pol.map(|b| if b { 1i8 } else { -1 });
            let csi = flat_csi(Format::Ht, IqSample::from_complex(Complex64::from_polar(mag, arg)));
            let sym = received(&csi, &pol, &[], |_| theta);
            let zero: SymPhase = [PhaseWord::ZERO; FFT_LEN];
            let sxy = peg_estimate(&sym, &zero, &csi, &pol).0;
            prop_assert!(sxy.abs() <= 4, "{}", sxy);
        }

        // Independently quantized pilots can each round one unit apart.
        #[test]
        fn peg_constant_residual_random_channel(theta in -3.0f64..3.0, seed in any::<u64>()) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let csi = random_csi(&mut rng, Format::Ht, 0.1, 0.5);
            let pol = [1, -1, -1, 1];
            let sym = received(&csi, &pol, &[], |_| theta);
            let zero: SymPhase = [PhaseWord::ZERO; FFT_LEN];
            let sxy = peg_estimate(&sym, &zero, &csi, &pol).0;
            prop_assert!(sxy.abs() <= 56, "{}", sxy);
        }
    }

    #[test]
    fn lvpe_examples() {
        let mut st = PilotTrackState::new(Format::Ht);
        let mut ph: SymPhase = [PhaseWord::new(99); FFT_LEN];
        let idx = data_indices(Format::Ht);
        lvpe_correction(&mut ph, PhaseWord::ZERO, &mut st, 0, idx, idx.len());
        assert!(idx.iter().all(|&k| ph[bin_of(k)] == PhaseWord::ZERO));

        lvpe_correction(&mut ph, PhaseWord::new(100), &mut st, 0, &PILOT_INDICES, 4);
        assert_eq!(ph[bin_of(21)], PhaseWord::new(100));

        let list = [-28, 7];
        let acc = lvpe_correction(&mut ph, PhaseWord::ZERO, &mut st, -1960, &list, 2);
        assert_eq!(acc, -2 << PEG_FRAC_BITS);
        assert_eq!(ph[bin_of(7)], PhaseWord::new(-14));
        assert_eq!(ph[bin_of(-28)], PhaseWord::new(56));

        // only `length` entries are written
        let mut ph2: SymPhase = [PhaseWord::ZERO; FFT_LEN];
        lvpe_correction(&mut ph2, PhaseWord::new(5), &mut st, 0, &PILOT_INDICES, 2);
        assert_eq!(ph2[bin_of(-7)], PhaseWord::new(5 + 14));
        assert_eq!(ph2[bin_of(7)], PhaseWord::ZERO);
    }

    #[test]
    fn acc_peg_is_clamped() {
        let mut st = PilotTrackState::new(Format::Ht);
        let mut ph: SymPhase = [PhaseWord::ZERO; FFT_LEN];
        for _ in 0..100 {
            lvpe_correction(&mut ph, PhaseWord::ZERO, &mut st, SXY_MAX, &PILOT_INDICES, 4);
        }
        assert_eq!(st.acc_peg, ACC_PEG_LIMIT);
        assert!(ph[bin_of(21)].units() <= PhaseWord::MAX);
    }

    #[test]
    fn zero_forcing_examples() {
        let csi = flat_csi(Format::Ht, IqSample::new(32767, 0));
        let zero: SymPhase = [PhaseWord::ZERO; FFT_LEN];
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let sym = FreqSymbol::from_subcarriers(|_| IqSample::new(rng.random_range(-16000..16000), rng.random_range(-16000..16000)));
        let y = correct_and_equalize(&sym, &zero, &csi);
        for (&k, p) in data_indices(Format::Ht).iter().zip(&y.points) {
            let d = p.to_complex() - sym.at(k).to_complex();
            assert!(d.re.abs() <= 1.0 / 16384.0 && d.im.abs() <= 1.0 / 16384.0);
        }
        assert_eq!(y.points.len(), 52);

        let csi = flat_csi(Format::Legacy, IqSample::from_f64(0.5, 0.0));
        let sym = FreqSymbol::from_subcarriers(|_| IqSample::from_f64(0.25, 0.0));
        let y = correct_and_equalize(&sym, &zero, &csi);
        assert!(y.points.iter().all(|p| p.to_complex() == Complex64::new(0.5, 0.0)));
        assert_eq!(y.points.len(), 48);
    }

    #[test]
    fn zero_forcing_matches_float_oracle() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let zero: SymPhase = [PhaseWord::ZERO; FFT_LEN];
        for _ in 0..2000 {
            let csi = random_csi(&mut rng, Format::Ht, 0.002, 0.9);
            let sym = FreqSymbol::from_subcarriers(|k| {
                let h = csi.at(k).to_complex();
                let y = Complex64::new(rng.random_range(-1.5..1.5), rng.random_range(-1.5..1.5));
                IqSample::from_complex(h * y)
            });
            let out = correct_and_equalize(&sym, &zero, &csi);
            for (&k, p) in data_indices(Format::Ht).iter().zip(&out.points) {
                let want = sym.at(k).to_complex() / csi.at(k).to_complex();
                if want.re.abs() >= 1.99 || want.im.abs() >= 1.99 {
                    continue;
                }
                let d = p.to_complex() - want;
                assert!(d.re.abs() <= 1.0 / 64.0 && d.im.abs() <= 1.0 / 64.0, "{want} {p:?}");
            }
        }
    }

    #[test]
    fn zero_channel_is_flagged() {
        let csi = Csi::from_fn(Format::Legacy, |k| if k == 5 { IqSample::ZERO } else { IqSample::new(1000, 0) });
        let zero: SymPhase = [PhaseWord::ZERO; FFT_LEN];
        let y = correct_and_equalize(&FreqSymbol::from_subcarriers(|_| IqSample::new(500, 0)), &zero, &csi);
        let pos = data_indices(Format::Legacy).iter().position(|&k| k == 5).unwrap();
        assert_eq!(y.points[pos], EqPoint::ZERO);
        assert_eq!(y.point_flags[pos], SymbolFlags::UNEQUALIZABLE);
        assert!(y.flags.contains(SymbolFlags::UNEQUALIZABLE));
        assert_eq!(y.point_flags.iter().filter(|f| !f.is_empty()).count(), 1);
    }

    // Uniform phase error θ on every subcarrier is removed to within LUT precision.
    #[test]
    fn sign_convention_closure() {
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        for trial in 0..300 {
            let format = if trial % 2 == 0 { Format::Ht } else { Format::Legacy };
            let csi = random_csi(&mut rng, format, 0.25, 0.5);
            let theta = rng.random_range(-3.1..3.1);
            let mut eq = Equalizer::new(format, Tracking::Enabled);
            let pol = PILOT_BASE.map(|b| b * POLARITY[0]);
            let data = random_data(&mut rng, format, Modulation::Qpsk);
            let sym = received(&csi, &pol, &data, |_| theta);
            let out = eq.equalize_symbol(&sym, &csi).unwrap();
            for (p, d) in out.points.iter().zip(&data) {
                let err = units((p.to_complex() / d).arg());
                assert!(err.abs() <= 3.0, "θ={theta}: {err}");
            }
        }
    }

    // A constant per-symbol slope δ accumulates linearly in acc_peg.
    #[test]
    fn acc_peg_accumulates_linearly() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let csi = random_csi(&mut rng, Format::Ht, 0.3, 0.5);
        let delta = 1.5; // units per index per symbol
        let mut eq = Equalizer::new(Format::Ht, Tracking::Enabled);
        for n in 1..=40 {
            let pol = PILOT_BASE.map(|b| b * POLARITY[(n - 1) % 127]);
            let slope = n as f64 * delta * TAU / 4096.0;
            let sym = received(&csi, &pol, &[], |k| -(k as f64) * slope);
            let out = eq.equalize_symbol(&sym, &csi).unwrap();
            let acc_units = out.acc_peg as f64 / 256.0;
            assert!((acc_units - n as f64 * delta).abs() <= n as f64 / 2.0, "n={n}: {acc_units}");
        }
    }

    #[test]
    fn ablation_forces_zero_tracking() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let csi = random_csi(&mut rng, Format::Ht, 0.3, 0.5);
        let mut eq = Equalizer::new(Format::Ht, Tracking::Disabled);
        let pol = PILOT_BASE.map(|b| b * POLARITY[0]);
        let sym = received(&csi, &pol, &[], |k| 0.3 + 0.01 * k as f64);
        let out = eq.equalize_symbol(&sym, &csi).unwrap();
        assert_eq!(out.cpe, PhaseWord::ZERO);
        assert_eq!(out.acc_peg, 0);
        assert_ne!(out.sxy, 0);
    }

    #[test]
    fn packet_equalization_is_deterministic_and_checks_length() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let csi = random_csi(&mut rng, Format::Legacy, 0.01, 0.1);
        let syms: Vec<FreqSymbol> = (0..10)
            .map(|_| FreqSymbol::from_subcarriers(|_| IqSample::new(rng.random_range(-900..900), rng.random_range(-900..900))))
            .collect();
        let run = || equalize_packet(&mut Equalizer::new(Format::Legacy, Tracking::Enabled), &syms, &csi, 10).unwrap();
        assert_eq!(run(), run());
        assert_eq!(
            equalize_packet(&mut Equalizer::new(Format::Legacy, Tracking::Enabled), &syms, &csi, 11),
            Err(EqError::ShortStream { expected: 11, got: 10 })
        );
        let mut eq = Equalizer::new(Format::Ht, Tracking::Enabled);
        assert!(matches!(eq.equalize_symbol(&syms[0], &csi), Err(EqError::FormatMismatch { .. })));
    }

    #[test]
    fn restart_keeps_slope_and_polarity() {
        let mut rng = ChaCha8Rng::seed_from_u64(10);
        let legacy = random_csi(&mut rng, Format::Legacy, 0.3, 0.5);
        let ht = random_csi(&mut rng, Format::Ht, 0.3, 0.5);
        let mut eq = Equalizer::new(Format::Legacy, Tracking::Enabled);
        for n in 0..3 {
            let pol = PILOT_BASE.map(|b| b * POLARITY[n]);
            let sym = received(&legacy, &pol, &[], |k| -(k as f64) * 0.002 * (n + 1) as f64);
            eq.equalize_symbol(&sym, &legacy).unwrap();
        }
        let before = eq.state;
        eq.restart(Format::Ht);
        assert_eq!(eq.state.acc_peg, before.acc_peg);
        assert_eq!(eq.state.pol_nr, 3);
        assert_ne!(before.acc_peg, 0);
        let out = eq.equalize_symbol(&received(&ht, &PILOT_BASE.map(|b| b * POLARITY[3]), &[], |_| 0.0), &ht).unwrap();
        assert_eq!(out.pol_nr, 3);
        assert_eq!(out.points.len(), 52);
        assert!(active_indices(Format::Ht).count() == 56);
    }
}
