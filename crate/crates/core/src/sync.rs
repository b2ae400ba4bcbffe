//! Packet detection, carrier offset estimation and correction, and symbol
//! boundary recovery.

use thiserror::Error;

use crate::frame::{GuardInterval, FFT_LEN, SAMPLE_RATE_HZ};
use crate::numerics::{atan2_lut, conj_mul, rotate, IqSample, PhaseWord, WideAcc, PHASE_CIRCLE};

pub const DETECT_LAG: usize = 16;
pub const DETECT_WINDOW: usize = 32;
/// Samples read per metric evaluation.
pub const METRIC_SPAN: usize = DETECT_WINDOW + DETECT_LAG;
pub const DETECT_THRESHOLD: f64 = 0.75;
pub const DETECT_RUN: usize = 16;
pub const MIN_DETECT_LEN: usize = 208;

pub const COARSE_LAG: usize = 16;
pub const COARSE_TERMS: usize = 128;
pub const FINE_LAG: usize = 64;
pub const FINE_TERMS: usize = 96;

/// Distance from the STF start to the first L-LTF period.
pub const LTF_OFFSET: usize = 192;
/// Half-width of the L-LTF timing search around the detected position.
pub const LTF_SEARCH: usize = 24;
/// Samples the FFT window is moved back into the guard interval.
pub const TIMING_BACKOFF: usize = 2;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Error)]
pub enum SyncError {
    #[error("zero-energy input")]
    ZeroEnergy,
    #[error("need {needed} samples, got {got}")]
    ShortInput { needed: usize, got: usize },
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DetectionResult {
    /// First position of the above-threshold run.
    pub start_index: Option<usize>,
    pub metric_peak: f64,
}

impl DetectionResult {
    pub fn detected(&self) -> bool {
        self.start_index.is_some()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CfoSource {
    Coarse,
    Fine,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CfoEstimate {
    pub freq_hz: f64,
    pub source: CfoSource,
    /// Measured phase advance over one lag.
    pub phase: PhaseWord,
}

/// Correlation and energy sums of one metric window.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct MetricSums {
    pub corr: WideAcc,
    pub energy: i64,
}

impl MetricSums {
    pub fn metric(&self) -> f64 {
        if self.energy == 0 {
            return 0.0;
        }
        let m = (self.corr.re as f64).hypot(self.corr.im as f64) / self.energy as f64;
        m.min(1.0)
    }

    /// Exact integer form of `metric() > 0.75`: 16·|c|² > 9·E².
    pub fn above_threshold(&self) -> bool {
        let c2 = (self.corr.re as i128).pow(2) + (self.corr.im as i128).pow(2);
        self.energy > 0 && 16 * c2 > 9 * (self.energy as i128).pow(2)
    }
}

/// Σₙ₌₀³¹ conj(r[n])·r[n+16] and Σₙ₌₀³¹ |r[n+16]|² over a 48-sample window.
pub fn metric_sums(window: &[IqSample]) -> MetricSums {
    let mut s = MetricSums::default();
    for n in 0..DETECT_WINDOW {
        s.corr += conj_mul(window[n], window[n + DETECT_LAG]);
        s.energy += window[n + DETECT_LAG].power();
    }
    s
}

/// Normalized autocorrelation in [0, 1]; 0 for a silent window.
pub fn autocorr_metric(window: &[IqSample; METRIC_SPAN]) -> f64 {
    metric_sums(window).metric()
}

/// Scans for 16 consecutive positions whose metric exceeds 0.75.
pub fn detect_packet(stream: &[IqSample]) -> DetectionResult {
    let mut peak = 0f64;
    if stream.len() < METRIC_SPAN {
        return DetectionResult { start_index: None, metric_peak: 0.0 };
    }
    let mut sums = metric_sums(&stream[..METRIC_SPAN]);
    let mut run = 0usize;
    let mut run_peak = 0f64;
    let last = stream.len() - METRIC_SPAN;
    for p in 0..=last {
        if p > 0 {
            // slide both windows forward by one sample
            let old = conj_mul(stream[p - 1], stream[p - 1 + DETECT_LAG]);
            sums.corr.re -= old.re;
            sums.corr.im -= old.im;
            let q = p + DETECT_WINDOW - 1;
            sums.corr += conj_mul(stream[q], stream[q + DETECT_LAG]);
            sums.energy += stream[q + DETECT_LAG].power() - stream[p - 1 + DETECT_LAG].power();
        }
        let m = sums.metric();
        peak = peak.max(m);
        if sums.above_threshold() {
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

/// Σₙ conj(r[n])·r[n+lag] for n in 0..terms.
pub fn lag_correlation(samples: &[IqSample], lag: usize, terms: usize) -> WideAcc {
    let mut acc = WideAcc::ZERO;
    for n in 0..terms {
        acc += conj_mul(samples[n], samples[n + lag]);
    }
    acc
}

/// Frequency of a phase advance of `phase` over `lag` samples.
pub fn phase_to_hz(phase: PhaseWord, lag: usize) -> f64 {
    phase.units() as f64 * SAMPLE_RATE_HZ / (PHASE_CIRCLE as f64 * lag as f64)
}

fn estimate(
    samples: &[IqSample],
    lag: usize,
    terms: usize,
    source: CfoSource,
) -> Result<CfoEstimate, SyncError> {
    let needed = lag + terms;
    if samples.len() < needed {
        return Err(SyncError::ShortInput { needed, got: samples.len() });
    }
    let phase = atan2_lut(lag_correlation(samples, lag, terms)).ok_or(SyncError::ZeroEnergy)?;
    Ok(CfoEstimate { freq_hz: phase_to_hz(phase, lag), source, phase })
}

/// Lag-16 estimate over the STF; unambiguous within ±625 kHz.
pub fn estimate_cfo_coarse(stf: &[IqSample]) -> Result<CfoEstimate, SyncError> {
    estimate(stf, COARSE_LAG, COARSE_TERMS, CfoSource::Coarse)
}

/// Lag-64 estimate over the 160-sample L-LTF field; unambiguous within ±156.25 kHz.
pub fn estimate_cfo_fine(ltf: &[IqSample]) -> Result<CfoEstimate, SyncError> {
    estimate(ltf, FINE_LAG, FINE_TERMS, CfoSource::Fine)
}

/// Phase-accumulator derotator. The accumulator is a 32-bit fraction of a
/// turn and persists across calls.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct CfoCorrector {
    step: u32,
    acc: u32,
}

impl CfoCorrector {
    pub fn new(freq_hz: f64) -> Self {
        let step = (-freq_hz / SAMPLE_RATE_HZ * 4294967296.0).round() as i64;
        CfoCorrector { step: step as u32, acc: 0 }
    }

    pub fn step(&self) -> u32 {
        self.step
    }

    /// Rotation applied to the next sample.
    #[inline]
    pub fn phase(&self) -> PhaseWord {
        PhaseWord::new((self.acc.wrapping_add(1 << 19) >> 20) as i32 & (PHASE_CIRCLE - 1))
    }

    #[inline]
    pub fn correct_sample(&mut self, s: IqSample) -> IqSample {
        let out = rotate(s, self.phase());
        self.acc = self.acc.wrapping_add(self.step);
        out
    }

    pub fn correct_into(&mut self, stream: &[IqSample], out: &mut Vec<IqSample>) {
        out.extend(stream.iter().map(|&s| self.correct_sample(s)));
    }

    pub fn correct(&mut self, stream: &[IqSample]) -> Vec<IqSample> {
        let mut out = Vec::with_capacity(stream.len());
        self.correct_into(stream, &mut out);
        out
    }
}

/// Derotates sample n by 2π·freq·n/fs.
pub fn correct_cfo(stream: &[IqSample], freq_hz: f64) -> Vec<IqSample> {
    CfoCorrector::new(freq_hz).correct(stream)
}

/// L1 magnitude of the cross-correlation with `reference` at `pos`.
pub fn ltf_correlation(stream: &[IqSample], pos: usize, reference: &[IqSample; FFT_LEN]) -> i64 {
    let mut acc = WideAcc::ZERO;
    for (n, &r) in reference.iter().enumerate() {
        acc += conj_mul(r, stream[pos + n]);
    }
    acc.re.abs() + acc.im.abs()
}

/// Start of the first L-LTF period: the correlation peak within
/// `LTF_SEARCH` samples of `detected + 192`. The earliest maximum wins.
pub fn align_ltf(
    stream: &[IqSample],
    detected: usize,
    reference: &[IqSample; FFT_LEN],
) -> Result<usize, SyncError> {
    let centre = detected + LTF_OFFSET;
    let lo = centre.saturating_sub(LTF_SEARCH);
    let hi = centre + LTF_SEARCH;
    let needed = hi + FFT_LEN;
    if stream.len() < needed {
        return Err(SyncError::ShortInput { needed, got: stream.len() });
    }
    let mut best = (lo, i64::MIN);
    for pos in lo..=hi {
        let c = ltf_correlation(stream, pos, reference);
        if c > best.1 {
            best = (pos, c);
        }
    }
    Ok(best.0)
}

/// The 64-sample FFT window of the symbol starting at `offset` (GI included).
pub fn extract_symbol(
    stream: &[IqSample],
    offset: usize,
    gi: GuardInterval,
) -> Result<[IqSample; FFT_LEN], SyncError> {
    let needed = offset + gi.symbol_len();
    if stream.len() < needed {
        return Err(SyncError::ShortInput { needed, got: stream.len() });
    }
    let start = offset + gi.len();
    Ok(std::array::from_fn(|n| stream[start + n]))
}
