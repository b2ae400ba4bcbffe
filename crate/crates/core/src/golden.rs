//! Double-precision reference model of the receive chain.
//!
//! Every stage is recomputed in f64 with the quantization points of the
//! fixed-point path made explicit (`round`, `clamp`), sharing only the sine
//! and arctangent lookup tables. Intermediate values are integers below 2⁵³
//! or quotients whose f64 rounding cannot cross a half-integer, so a correct
//! fixed-point implementation matches it bit for bit. [`Fault`] perturbs the
//! rounding of one stage to show that [`compare`] localizes a divergence.

use std::fmt;

use crate::chanest::Csi;
use crate::equalizer::{
    EqError, EqPoint, EqualizedSymbol, Equalizer, SymbolFlags, Tracking, ACC_PEG_LIMIT, EQ_ONE, PEG_FRAC_BITS,
    SXY_MAX,
};
use crate::fft64::FreqSymbol;
use crate::frame::{active_indices, data_indices, Format, FFT_LEN, PILOT_INDEX_ENERGY, PILOT_INDICES};
use crate::numerics::{atan2_lut, sin_cos, IqSample, PhaseWord, WideAcc, PHASE_CIRCLE, TWIDDLES};
use crate::receiver::{Backend, RxTrace};
use crate::sync::{
    phase_to_hz, CfoEstimate, CfoSource, DetectionResult, SyncError, DETECT_LAG, DETECT_RUN, DETECT_WINDOW,
    LTF_OFFSET, LTF_SEARCH, METRIC_SPAN,
};
use crate::txref::{htltf_sign, lltf_sign, polarity, PILOT_BASE, POLARITY_PERIOD};

/// Stage whose rounding the golden model deliberately gets wrong.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Fault {
    /// Derotation truncates instead of rounding.
    Derotation,
    /// FFT butterflies floor instead of rounding.
    Fft,
    /// L-LTF averaging floors instead of rounding.
    ChannelEstimate,
    /// Zero-forcing quotient truncates instead of rounding.
    Equalizer,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct Golden {
    pub fault: Option<Fault>,
}

impl Golden {
    pub fn with_fault(fault: Fault) -> Self {
        Golden { fault: Some(fault) }
    }

    fn quantizer(&self, stage: Fault) -> fn(f64) -> f64 {
        match self.fault {
            Some(f) if f == stage => match stage {
                Fault::Fft | Fault::ChannelEstimate => f64::floor,
                Fault::Derotation | Fault::Equalizer => f64::trunc,
            },
            _ => f64::round,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
struct Cf {
    re: f64,
    im: f64,
}

impl Cf {
    const ZERO: Cf = Cf { re: 0.0, im: 0.0 };

    fn of(s: IqSample) -> Cf {
        Cf { re: s.re as f64, im: s.im as f64 }
    }

    fn to_iq(self) -> IqSample {
        IqSample::new(sat(self.re) as i16, sat(self.im) as i16)
    }

    /// conj(self)·b
    fn conj_mul(self, b: Cf) -> Cf {
        Cf { re: self.re * b.re + self.im * b.im, im: self.re * b.im - self.im * b.re }
    }

    fn power(self) -> f64 {
        self.re * self.re + self.im * self.im
    }

    fn add(self, b: Cf) -> Cf {
        Cf { re: self.re + b.re, im: self.im + b.im }
    }

    fn scale(self, k: f64) -> Cf {
        Cf { re: self.re * k, im: self.im * k }
    }
}

fn sat(x: f64) -> f64 {
    x.clamp(i16::MIN as f64, i16::MAX as f64)
}

fn sat_phase(x: f64) -> f64 {
    x.clamp(PhaseWord::MIN as f64, PhaseWord::MAX as f64)
}

fn angle(c: Cf) -> Option<PhaseWord> {
    atan2_lut(WideAcc::new(c.re as i64, c.im as i64))
}

fn rotate(s: Cf, phi: f64, q: fn(f64) -> f64) -> Cf {
    let (sn, c) = sin_cos(PhaseWord::new(phi as i32));
    let (sn, c) = (sn as f64, c as f64);
    let one = (1 << 14) as f64;
    Cf { re: sat(q((s.re * c - s.im * sn) / one)), im: sat(q((s.re * sn + s.im * c) / one)) }
}

fn lag_sum(x: &[IqSample], lag: usize, terms: usize) -> Cf {
    (0..terms).fold(Cf::ZERO, |acc, n| acc.add(Cf::of(x[n]).conj_mul(Cf::of(x[n + lag]))))
}

// Saturating sign application on a sample, as IqSample::signed.
fn signed(c: Cf, s: i8) -> Cf {
    if s < 0 {
        Cf { re: sat(-c.re), im: sat(-c.im) }
    } else {
        c
    }
}

// Subcarrier k rotated by cpe + k·acc.
fn phase_corrected(sym: &FreqSymbol, cpe: f64, acc: f64, k: i32) -> Cf {
    let slope = sat_phase((k as f64 * acc / (1 << PEG_FRAC_BITS) as f64).round());
    rotate(Cf::of(sym.at(k)), sat_phase(cpe + slope), f64::round)
}

impl Backend for Golden {
    fn detect(&self, stream: &[IqSample]) -> DetectionResult {
        let mut peak = 0f64;
        let mut run = 0usize;
        let mut run_peak = 0f64;
        if stream.len() < METRIC_SPAN {
            return DetectionResult { start_index: None, metric_peak: 0.0 };
        }
        for p in 0..=stream.len() - METRIC_SPAN {
            let w = &stream[p..p + METRIC_SPAN];
            let c = lag_sum(w, DETECT_LAG, DETECT_WINDOW);
            let e: f64 = (0..DETECT_WINDOW).map(|n| Cf::of(w[n + DETECT_LAG]).power()).sum();
            let m = if e == 0.0 { 0.0 } else { (c.re.hypot(c.im) / e).min(1.0) };
            peak = peak.max(m);
            if e > 0.0 && 16.0 * c.power() > 9.0 * e * e {
                run += 1;
                run_peak = run_peak.max(m);
                if run == DETECT_RUN {
                    return DetectionResult { start_index: Some(p + 1 - DETECT_RUN), metric_peak: run_peak };
                }
            } else {
                run = 0;
                run_peak = 0.0;
            }
        }
        DetectionResult { start_index: None, metric_peak: peak }
    }

    fn estimate_cfo(
        &self,
        samples: &[IqSample],
        lag: usize,
        terms: usize,
        source: CfoSource,
    ) -> Result<CfoEstimate, SyncError> {
        if samples.len() < lag + terms {
            return Err(SyncError::ShortInput { needed: lag + terms, got: samples.len() });
        }
        let phase = angle(lag_sum(samples, lag, terms)).ok_or(SyncError::ZeroEnergy)?;
        Ok(CfoEstimate { freq_hz: phase_to_hz(phase, lag), source, phase })
    }

    fn derotate(&self, stream: &[IqSample], freq_hz: f64) -> Vec<IqSample> {
        const TURN: f64 = 4294967296.0;
        let q = self.quantizer(Fault::Derotation);
        let step = (-freq_hz / crate::frame::SAMPLE_RATE_HZ * TURN).round().rem_euclid(TURN);
        let mut acc = 0f64;
        stream
            .iter()
            .map(|&s| {
                let phase = (((acc + (1 << 19) as f64) % TURN) / (1 << 20) as f64).floor() % PHASE_CIRCLE as f64;
                acc = (acc + step) % TURN;
                rotate(Cf::of(s), phase, q).to_iq()
            })
            .collect()
    }

    fn align_ltf(
        &self,
        stream: &[IqSample],
        detected: usize,
        reference: &[IqSample; FFT_LEN],
    ) -> Result<usize, SyncError> {
        let centre = detected + LTF_OFFSET;
        let (lo, hi) = (centre.saturating_sub(LTF_SEARCH), centre + LTF_SEARCH);
        if stream.len() < hi + FFT_LEN {
            return Err(SyncError::ShortInput { needed: hi + FFT_LEN, got: stream.len() });
        }
        let mut best = (lo, f64::NEG_INFINITY);
        for pos in lo..=hi {
            let c = (0..FFT_LEN).fold(Cf::ZERO, |a, n| a.add(Cf::of(reference[n]).conj_mul(Cf::of(stream[pos + n]))));
            let l1 = c.re.abs() + c.im.abs();
            if l1 > best.1 {
                best = (pos, l1);
            }
        }
        Ok(best.0)
    }

    fn fft(&self, window: &[IqSample; FFT_LEN]) -> FreqSymbol {
        let q = self.quantizer(Fault::Fft);
        // decimation in time on bit-reversed input
        let mut x: Vec<Cf> = (0..FFT_LEN).map(|n| Cf::of(window[((n as u8).reverse_bits() >> 2) as usize])).collect();
        let scale = (1u64 << 16) as f64;
        let mut half = 1;
        while half < FFT_LEN {
            for start in (0..FFT_LEN).step_by(2 * half) {
                for k in 0..half {
                    let (wr, wi) = TWIDDLES[k * FFT_LEN / (2 * half)];
                    let (wr, wi) = (wr as f64, wi as f64);
                    let (a, b) = (x[start + k], x[start + k + half]);
                    let t = Cf { re: b.re * wr - b.im * wi, im: b.re * wi + b.im * wr };
                    let a = a.scale((1 << 15) as f64);
                    x[start + k] = Cf { re: sat(q((a.re + t.re) / scale)), im: sat(q((a.im + t.im) / scale)) };
                    x[start + k + half] = Cf { re: sat(q((a.re - t.re) / scale)), im: sat(q((a.im - t.im) / scale)) };
                }
            }
            half *= 2;
        }
        FreqSymbol::from_bins(std::array::from_fn(|n| x[n].to_iq()))
    }

    fn estimate_legacy(&self, sym1: &FreqSymbol, sym2: &FreqSymbol) -> Csi {
        let q = self.quantizer(Fault::ChannelEstimate);
        Csi::from_fn(Format::Legacy, |k| {
            let s = Cf::of(sym1.at(k)).add(Cf::of(sym2.at(k)));
            signed(Cf { re: q(s.re / 2.0), im: q(s.im / 2.0) }, lltf_sign(k)).to_iq()
        })
    }

    fn estimate_ht(&self, sym: &FreqSymbol) -> Csi {
        Csi::from_fn(Format::Ht, |k| signed(Cf::of(sym.at(k)), htltf_sign(k)).to_iq())
    }

    fn smooth(&self, csi: &Csi) -> Csi {
        let idx: Vec<i32> = active_indices(csi.format).collect();
        let mut n = 0;
        let mut out = Csi::from_fn(csi.format, |_| {
            let (lo, hi) = (n.max(1) - 1, (n + 1).min(idx.len() - 1));
            n += 1;
            let s = idx[lo..=hi].iter().fold(Cf::ZERO, |a, &j| a.add(Cf::of(csi.at(j))));
            let len = (hi - lo + 1) as f64;
            Cf { re: (s.re / len).round(), im: (s.im / len).round() }.to_iq()
        });
        out.smoothed = true;
        out
    }

    fn equalize_symbol(&self, eq: &mut Equalizer, sym: &FreqSymbol, csi: &Csi) -> Result<EqualizedSymbol, EqError> {
        let st = &mut eq.state;
        if csi.format != st.format {
            return Err(EqError::FormatMismatch { csi: csi.format, eq: st.format });
        }
        let enabled = eq.tracking == Tracking::Enabled;
        let pol_nr = st.pol_nr;
        let p = polarity(pol_nr as usize);
        let pol: [i8; 4] = std::array::from_fn(|j| PILOT_BASE[j] * p);
        st.current_polarity = pol;
        st.pol_nr = ((pol_nr as usize + 1) % POLARITY_PERIOD) as u8;
        let mut flags = SymbolFlags::empty();

        let wide = |c: Cf, s: i8| if s < 0 { Cf { re: -c.re, im: -c.im } } else { c };
        let psum = PILOT_INDICES
            .iter()
            .zip(&pol)
            .fold(Cf::ZERO, |a, (&k, &s)| a.add(wide(Cf::of(sym.at(k)).conj_mul(Cf::of(csi.at(k))), s)));
        let cpe = match angle(psum) {
            Some(c) if enabled => c.units() as f64,
            Some(_) => 0.0,
            None => {
                flags |= SymbolFlags::DEGENERATE_CPE;
                0.0
            }
        };
        if !enabled {
            st.acc_peg = 0;
        }

        // pilots corrected with the slope carried in from earlier symbols
        let acc0 = st.acc_peg as f64;
        let mut sxy = 0f64;
        for (&k, &s) in PILOT_INDICES.iter().zip(&pol) {
            let x = phase_corrected(sym, cpe, acc0, k);
            match angle(wide(x.conj_mul(Cf::of(csi.at(k))), s)) {
                Some(a) => sxy += k as f64 * a.units() as f64,
                None => flags |= SymbolFlags::DEGENERATE_PEG,
            }
        }
        let sxy = sxy.clamp(-(SXY_MAX as f64), SXY_MAX as f64);
        let applied = if enabled { sxy } else { 0.0 };
        let incr = (applied * (1 << PEG_FRAC_BITS) as f64 / PILOT_INDEX_ENERGY as f64).round();
        let limit = ACC_PEG_LIMIT as f64;
        let acc = (acc0 + incr).clamp(-limit, limit);
        st.acc_peg = acc as i32;

        let q = self.quantizer(Fault::Equalizer);
        let idx = data_indices(st.format);
        let mut points = Vec::with_capacity(idx.len());
        let mut point_flags = Vec::with_capacity(idx.len());
        for &k in idx {
            let x = phase_corrected(sym, cpe, acc, k);
            let h = Cf::of(csi.at(k));
            let den = h.power();
            if den == 0.0 {
                points.push(EqPoint::ZERO);
                point_flags.push(SymbolFlags::UNEQUALIZABLE);
                flags |= SymbolFlags::UNEQUALIZABLE;
                continue;
            }
            let n = h.conj_mul(x).scale(EQ_ONE as f64);
            points.push(EqPoint { re: sat(q(n.re / den)) as i16, im: sat(q(n.im / den)) as i16 });
            point_flags.push(SymbolFlags::empty());
        }
        Ok(EqualizedSymbol {
            format: csi.format,
            points,
            point_flags,
            flags,
            cpe: PhaseWord::new(cpe as i32),
            sxy: sxy as i32,
            acc_peg: st.acc_peg,
            pol_nr,
        })
    }
}

/// Pipeline stage in processing order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Stage {
    Detection,
    CoarseCfo,
    LtfAlignment,
    FineCfo,
    Derotation,
    Fft,
    ChannelEstimate,
    Equalizer,
}

impl fmt::Display for Stage {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            Stage::Detection => "detection",
            Stage::CoarseCfo => "coarse-cfo",
            Stage::LtfAlignment => "ltf-alignment",
            Stage::FineCfo => "fine-cfo",
            Stage::Derotation => "derotation",
            Stage::Fft => "fft",
            Stage::ChannelEstimate => "channel-estimate",
            Stage::Equalizer => "equalizer",
        };
        f.write_str(s)
    }
}

/// First point where two traces differ.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Divergence {
    pub stage: Stage,
    /// Field within the packet ("l-ltf", "sig", "ht-ltf", "data") or the
    /// quantity compared ("cpe", "acc_peg", ...).
    pub what: String,
    pub symbol: Option<usize>,
    pub subcarrier: Option<i32>,
    /// Sample index relative to the trace start.
    pub sample: Option<usize>,
    pub fixed: String,
    pub golden: String,
}

impl fmt::Display for Divergence {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} {}", self.stage, self.what)?;
        if let Some(s) = self.symbol {
            write!(f, " symbol {s}")?;
        }
        if let Some(k) = self.subcarrier {
            write!(f, " subcarrier {k}")?;
        }
        if let Some(n) = self.sample {
            write!(f, " sample {n}")?;
        }
        write!(f, ": fixed {} golden {}", self.fixed, self.golden)
    }
}

fn bits(s: IqSample) -> String {
    format!("({:#06x},{:#06x})", s.re as u16, s.im as u16)
}

fn eq_bits(p: EqPoint) -> String {
    format!("({:#06x},{:#06x})", p.re as u16, p.im as u16)
}

fn div(stage: Stage, what: &str) -> Divergence {
    Divergence {
        stage,
        what: what.to_string(),
        symbol: None,
        subcarrier: None,
        sample: None,
        fixed: String::new(),
        golden: String::new(),
    }
}

fn scalar<T: PartialEq + fmt::Debug>(stage: Stage, what: &str, a: T, b: T) -> Result<(), Divergence> {
    if a == b {
        return Ok(());
    }
    Err(Divergence { fixed: format!("{a:?}"), golden: format!("{b:?}"), ..div(stage, what) })
}

fn spectra(what: &str, a: &[FreqSymbol], b: &[FreqSymbol]) -> Result<(), Divergence> {
    scalar(Stage::Fft, &format!("{what} count"), a.len(), b.len())?;
    for (s, (x, y)) in a.iter().zip(b).enumerate() {
        for k in -32..32 {
            if x.at(k) != y.at(k) {
                return Err(Divergence {
                    symbol: Some(s),
                    subcarrier: Some(k),
                    fixed: bits(x.at(k)),
                    golden: bits(y.at(k)),
                    ..div(Stage::Fft, what)
                });
            }
        }
    }
    Ok(())
}

fn csi(what: &str, a: &Csi, b: &Csi) -> Result<(), Divergence> {
    scalar(Stage::ChannelEstimate, &format!("{what} smoothed"), a.smoothed, b.smoothed)?;
    for k in -32..32 {
        if a.at(k) != b.at(k) {
            return Err(Divergence {
                subcarrier: Some(k),
                fixed: bits(a.at(k)),
                golden: bits(b.at(k)),
                ..div(Stage::ChannelEstimate, what)
            });
        }
    }
    Ok(())
}

fn equalized(what: &str, a: &[EqualizedSymbol], b: &[EqualizedSymbol]) -> Result<(), Divergence> {
    let st = Stage::Equalizer;
    scalar(st, &format!("{what} count"), a.len(), b.len())?;
    for (s, (x, y)) in a.iter().zip(b).enumerate() {
        let at = |d: Divergence| Divergence { symbol: Some(s), ..d };
        scalar(st, "pol_nr", x.pol_nr, y.pol_nr).map_err(at)?;
        scalar(st, "cpe", x.cpe, y.cpe).map_err(at)?;
        scalar(st, "sxy", x.sxy, y.sxy).map_err(at)?;
        scalar(st, "acc_peg", x.acc_peg, y.acc_peg).map_err(at)?;
        scalar(st, "flags", x.flags, y.flags).map_err(at)?;
        for ((&k, p), q) in data_indices(x.format).iter().zip(&x.points).zip(&y.points) {
            if p != q {
                return Err(Divergence {
                    symbol: Some(s),
                    subcarrier: Some(k),
                    fixed: eq_bits(*p),
                    golden: eq_bits(*q),
                    ..div(st, what)
                });
            }
        }
    }
    Ok(())
}

fn compare_all(a: &RxTrace, b: &RxTrace) -> Result<(), Divergence> {
    scalar(Stage::Detection, "start", a.detection.start_index, b.detection.start_index)?;
    scalar(Stage::Detection, "metric_peak", a.detection.metric_peak, b.detection.metric_peak)?;
    scalar(Stage::Detection, "packet start", a.start, b.start)?;
    scalar(Stage::CoarseCfo, "phase", a.coarse.phase, b.coarse.phase)?;
    scalar(Stage::LtfAlignment, "ltf index", a.ltf_index, b.ltf_index)?;
    scalar(Stage::FineCfo, "phase", a.fine.phase, b.fine.phase)?;
    scalar(Stage::Derotation, "length", a.corrected.len(), b.corrected.len())?;
    if let Some(n) = (0..a.corrected.len()).find(|&n| a.corrected[n] != b.corrected[n]) {
        return Err(Divergence {
            sample: Some(n),
            fixed: bits(a.corrected[n]),
            golden: bits(b.corrected[n]),
            ..div(Stage::Derotation, "sample")
        });
    }
    spectra("l-ltf", &a.ltf_spectra, &b.ltf_spectra)?;
    spectra("sig", &a.signal_spectra, &b.signal_spectra)?;
    spectra("ht-ltf", a.ht_ltf_spectrum.as_slice(), b.ht_ltf_spectrum.as_slice())?;
    spectra("data", &a.data_spectra, &b.data_spectra)?;
    csi("l-ltf", &a.legacy_csi, &b.legacy_csi)?;
    match (&a.ht_csi, &b.ht_csi) {
        (Some(x), Some(y)) => csi("ht-ltf", x, y)?,
        (None, None) => {}
        (x, y) => scalar(Stage::ChannelEstimate, "ht-ltf present", x.is_some(), y.is_some())?,
    }
    equalized("sig", &a.signal, &b.signal)?;
    equalized("data", &a.data, &b.data)
}

/// Earliest difference between a fixed-point and a golden trace.
pub fn compare(fixed: &RxTrace, golden: &RxTrace) -> Option<Divergence> {
    compare_all(fixed, golden).err()
}
