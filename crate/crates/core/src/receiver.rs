//! The receive chain: detection, carrier offset, timing, FFT, channel
//! estimation and equalization.
//!
//! The control flow is written once against [`Backend`]; the fixed-point
//! implementation and the golden model plug in their own arithmetic.

use thiserror::Error;

use crate::chanest::{self, Csi};
use crate::equalizer::{EqError, EqualizedSymbol, Equalizer, Tracking};
use crate::fft64::{fft64, FreqSymbol};
use crate::frame::{Format, GuardInterval, FFT_LEN, STF_LEN};
use crate::numerics::IqSample;
use crate::sync::{
    self, CfoCorrector, CfoEstimate, CfoSource, DetectionResult, SyncError, COARSE_LAG, COARSE_TERMS,
    FINE_LAG, FINE_TERMS, LTF_OFFSET, LTF_SEARCH, TIMING_BACKOFF,
};
use crate::txref::{ltf_reference, PacketConfig};

/// Arithmetic of every stage of the chain.
pub trait Backend {
    fn detect(&self, stream: &[IqSample]) -> DetectionResult;
    fn estimate_cfo(
        &self,
        samples: &[IqSample],
        lag: usize,
        terms: usize,
        source: CfoSource,
    ) -> Result<CfoEstimate, SyncError>;
    fn derotate(&self, stream: &[IqSample], freq_hz: f64) -> Vec<IqSample>;
    fn align_ltf(
        &self,
        stream: &[IqSample],
        detected: usize,
        reference: &[IqSample; FFT_LEN],
    ) -> Result<usize, SyncError>;
    fn fft(&self, window: &[IqSample; FFT_LEN]) -> FreqSymbol;
    fn estimate_legacy(&self, sym1: &FreqSymbol, sym2: &FreqSymbol) -> Csi;
    fn estimate_ht(&self, sym: &FreqSymbol) -> Csi;
    fn smooth(&self, csi: &Csi) -> Csi;
    fn equalize_symbol(&self, eq: &mut Equalizer, sym: &FreqSymbol, csi: &Csi) -> Result<EqualizedSymbol, EqError>;
}

/// The bit-accurate fixed-point implementation.
#[derive(Debug, Clone, Copy, Default)]
pub struct FixedPoint;

impl Backend for FixedPoint {
    fn detect(&self, stream: &[IqSample]) -> DetectionResult {
        sync::detect_packet(stream)
    }

    fn estimate_cfo(
        &self,
        samples: &[IqSample],
        lag: usize,
        terms: usize,
        source: CfoSource,
    ) -> Result<CfoEstimate, SyncError> {
        match source {
            CfoSource::Coarse if (lag, terms) == (COARSE_LAG, COARSE_TERMS) => sync::estimate_cfo_coarse(samples),
            CfoSource::Fine if (lag, terms) == (FINE_LAG, FINE_TERMS) => sync::estimate_cfo_fine(samples),
            _ => {
                let phase = crate::numerics::atan2_lut(sync::lag_correlation(samples, lag, terms))
                    .ok_or(SyncError::ZeroEnergy)?;
                Ok(CfoEstimate { freq_hz: sync::phase_to_hz(phase, lag), source, phase })
            }
        }
    }

    fn derotate(&self, stream: &[IqSample], freq_hz: f64) -> Vec<IqSample> {
        CfoCorrector::new(freq_hz).correct(stream)
    }

    fn align_ltf(
        &self,
        stream: &[IqSample],
        detected: usize,
        reference: &[IqSample; FFT_LEN],
    ) -> Result<usize, SyncError> {
        sync::align_ltf(stream, detected, reference)
    }

    fn fft(&self, window: &[IqSample; FFT_LEN]) -> FreqSymbol {
        fft64(window)
    }

    fn estimate_legacy(&self, sym1: &FreqSymbol, sym2: &FreqSymbol) -> Csi {
        chanest::estimate_legacy(sym1, sym2)
    }

    fn estimate_ht(&self, sym: &FreqSymbol) -> Csi {
        chanest::estimate_ht(sym)
    }

    fn smooth(&self, csi: &Csi) -> Csi {
        chanest::smooth(csi)
    }

    fn equalize_symbol(&self, eq: &mut Equalizer, sym: &FreqSymbol, csi: &Csi) -> Result<EqualizedSymbol, EqError> {
        eq.equalize_symbol(sym, csi)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct RxConfig {
    /// Smooth the L-LTF estimate (Legacy data and all SIG symbols).
    pub legacy_smoothing: bool,
    pub tracking: Tracking,
    /// Packet start used when detection fails.
    pub timing_hint: Option<usize>,
    /// Use `timing_hint` even when detection fires.
    pub prefer_hint: bool,
}

impl Default for RxConfig {
    fn default() -> Self {
        RxConfig { legacy_smoothing: false, tracking: Tracking::Enabled, timing_hint: None, prefer_hint: false }
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum RxError {
    #[error("no packet detected")]
    NotDetected,
    #[error("invalid packet configuration: {0}")]
    Config(#[from] crate::txref::TxError),
    #[error("sync: {0}")]
    Sync(#[from] SyncError),
    #[error("equalizer: {0}")]
    Eq(#[from] EqError),
}

/// Everything the chain computed for one packet.
#[derive(Debug, Clone, PartialEq)]
pub struct RxTrace {
    pub detection: DetectionResult,
    /// Stream index every later position is relative to.
    pub start: usize,
    pub used_hint: bool,
    pub coarse: CfoEstimate,
    pub fine: CfoEstimate,
    /// First L-LTF period, relative to `start`.
    pub ltf_index: usize,
    /// Stream from `start` after coarse+fine derotation.
    pub corrected: Vec<IqSample>,
    pub ltf_spectra: [FreqSymbol; 2],
    pub signal_spectra: Vec<FreqSymbol>,
    pub ht_ltf_spectrum: Option<FreqSymbol>,
    pub data_spectra: Vec<FreqSymbol>,
    pub legacy_csi: Csi,
    pub ht_csi: Option<Csi>,
    pub signal: Vec<EqualizedSymbol>,
    pub data: Vec<EqualizedSymbol>,
}

impl RxTrace {
    pub fn cfo_hz(&self) -> f64 {
        self.coarse.freq_hz + self.fine.freq_hz
    }

    /// CSI used for the data symbols.
    pub fn data_csi(&self) -> &Csi {
        self.ht_csi.as_ref().unwrap_or(&self.legacy_csi)
    }
}

/// Samples after `start` needed before alignment and fine CFO.
const PREAMBLE_SPAN: usize = LTF_OFFSET + LTF_SEARCH + 2 * FFT_LEN;

fn window(stream: &[IqSample], pos: usize) -> Result<[IqSample; FFT_LEN], SyncError> {
    if stream.len() < pos + FFT_LEN {
        return Err(SyncError::ShortInput { needed: pos + FFT_LEN, got: stream.len() });
    }
    Ok(std::array::from_fn(|n| stream[pos + n]))
}

/// Runs the chain with the fixed-point backend.
pub fn receive(stream: &[IqSample], cfg: &PacketConfig, rx: &RxConfig) -> Result<RxTrace, RxError> {
    receive_with(&FixedPoint, stream, cfg, rx)
}

pub fn receive_with<B: Backend>(
    backend: &B,
    stream: &[IqSample],
    cfg: &PacketConfig,
    rx: &RxConfig,
) -> Result<RxTrace, RxError> {
    cfg.validate()?;
    let layout = cfg.layout();
    let detection = backend.detect(stream);
    let (start, used_hint) = match (detection.start_index, rx.timing_hint) {
        (_, Some(h)) if rx.prefer_hint => (h, true),
        (Some(s), _) => (s, false),
        (None, Some(h)) => (h, true),
        (None, None) => return Err(RxError::NotDetected),
    };
    let tail = stream.get(start..).unwrap_or(&[]);

    let stf = tail.get(..STF_LEN).ok_or(SyncError::ShortInput { needed: start + STF_LEN, got: stream.len() })?;
    let coarse = backend.estimate_cfo(stf, COARSE_LAG, COARSE_TERMS, CfoSource::Coarse)?;

    let pre = backend.derotate(&tail[..PREAMBLE_SPAN.min(tail.len())], coarse.freq_hz);
    let reference = ltf_reference();
    let ltf_index = backend.align_ltf(&pre, 0, &reference)?;
    let ltf_field = pre
        .get(ltf_index - 32..ltf_index + 128)
        .ok_or(SyncError::ShortInput { needed: start + ltf_index + 128, got: stream.len() })?;
    let fine = backend.estimate_cfo(ltf_field, FINE_LAG, FINE_TERMS, CfoSource::Fine)?;

    // Field offsets in the layout are relative to the STF start, which sits
    // LTF_OFFSET before the first L-LTF period.
    let origin = ltf_index as i64 - LTF_OFFSET as i64;
    let at = |field: usize, gi: usize| (origin + field as i64 + gi as i64 - TIMING_BACKOFF as i64) as usize;
    let needed = (origin + layout.len as i64).max(0) as usize;
    if tail.len() < needed {
        return Err(SyncError::ShortInput { needed: start + needed, got: stream.len() }.into());
    }
    let corrected = backend.derotate(&tail[..needed], coarse.freq_hz + fine.freq_hz);

    let ltf1 = ltf_index - TIMING_BACKOFF;
    let ltf_spectra = [backend.fft(&window(&corrected, ltf1)?), backend.fft(&window(&corrected, ltf1 + FFT_LEN)?)];
    let long = GuardInterval::Long.len();
    let signal_spectra = layout
        .signal
        .iter()
        .map(|&s| Ok(backend.fft(&window(&corrected, at(s, long))?)))
        .collect::<Result<Vec<_>, SyncError>>()?;
    let ht_ltf_spectrum = match layout.ht_ltf {
        Some(s) => Some(backend.fft(&window(&corrected, at(s, long))?)),
        None => None,
    };
    let data_spectra = layout
        .data
        .iter()
        .map(|&s| Ok(backend.fft(&window(&corrected, at(s, cfg.gi.len()))?)))
        .collect::<Result<Vec<_>, SyncError>>()?;

    let mut legacy_csi = backend.estimate_legacy(&ltf_spectra[0], &ltf_spectra[1]);
    if rx.legacy_smoothing {
        legacy_csi = backend.smooth(&legacy_csi);
    }
    let ht_csi = ht_ltf_spectrum.as_ref().map(|s| {
        let c = backend.estimate_ht(s);
        if cfg.smoothing_recommended {
            backend.smooth(&c)
        } else {
            c
        }
    });

    let mut eq = Equalizer::new(Format::Legacy, rx.tracking);
    let signal = signal_spectra
        .iter()
        .map(|s| backend.equalize_symbol(&mut eq, s, &legacy_csi))
        .collect::<Result<Vec<_>, EqError>>()?;
    let data_csi = match &ht_csi {
        Some(c) => {
            eq.restart(Format::Ht);
            c
        }
        None => &legacy_csi,
    };
    let data = data_spectra
        .iter()
        .map(|s| backend.equalize_symbol(&mut eq, s, data_csi))
        .collect::<Result<Vec<_>, EqError>>()?;

    Ok(RxTrace {
        detection,
        start,
        used_hint,
        coarse,
        fine,
        ltf_index,
        corrected,
        ltf_spectra,
        signal_spectra,
        ht_ltf_spectrum,
        data_spectra,
        legacy_csi,
        ht_csi,
        signal,
        data,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::channel::{apply_profile, ChannelProfile};
    use crate::txref::{build_random_packet, signal_points, Modulation};

    fn padded(samples: &[IqSample], lead: usize) -> Vec<IqSample> {
        let mut s = vec![IqSample::ZERO; lead];
        s.extend_from_slice(samples);
        s.extend(vec![IqSample::ZERO; 64]);
        s
    }

    #[test]
    fn clean_loopback_recovers_every_point() {
        for (format, gi) in [
            (Format::Legacy, GuardInterval::Long),
            (Format::Ht, GuardInterval::Long),
            (Format::Ht, GuardInterval::Short),
        ] {
            for mcs in 0..8 {
                let cfg = PacketConfig::new(format, gi, mcs, 6, false).unwrap();
                let tx = build_random_packet(&cfg, mcs as u64).unwrap();
                let trace = receive(&padded(&tx.samples, 40), &cfg, &RxConfig::default()).unwrap();
                assert!(!trace.used_hint);
                assert_eq!(trace.data.len(), 6);
                for (sym, want) in trace.data.iter().zip(&tx.points) {
                    for (p, w) in sym.points.iter().zip(want) {
                        let d = p.to_complex() - w;
                        assert!(d.re.abs() <= 1.0 / 64.0 && d.im.abs() <= 1.0 / 64.0, "{format} mcs{mcs}: {d}");
                    }
                }
                let sig_bpsk = Modulation::Bpsk;
                for (s, sym) in trace.signal.iter().enumerate() {
                    let decided: Vec<_> = sym.points.iter().map(|p| sig_bpsk.decide(p.to_complex())).collect();
                    let want: Vec<_> = signal_points(s).iter().map(|&p| sig_bpsk.decide(p)).collect();
                    assert_eq!(decided, want);
                }
            }
        }
    }

    #[test]
    fn ht_smoothing_follows_signal_bit() {
        for bit in [false, true] {
            let cfg = PacketConfig::new(Format::Ht, GuardInterval::Long, 2, 2, bit).unwrap();
            let tx = build_random_packet(&cfg, 1).unwrap();
            let trace = receive(&padded(&tx.samples, 10), &cfg, &RxConfig::default()).unwrap();
            assert_eq!(trace.ht_csi.unwrap().smoothed, bit);
            assert!(!trace.legacy_csi.smoothed);
        }
        let cfg = PacketConfig::new(Format::Legacy, GuardInterval::Long, 2, 2, true).unwrap();
        let tx = build_random_packet(&cfg, 1).unwrap();
        let rx = RxConfig { legacy_smoothing: true, ..RxConfig::default() };
        let trace = receive(&padded(&tx.samples, 10), &cfg, &rx).unwrap();
        assert!(trace.legacy_csi.smoothed);
    }

    #[test]
    fn cfo_is_removed_end_to_end() {
        let cfg = PacketConfig::new(Format::Ht, GuardInterval::Long, 4, 4, false).unwrap();
        let tx = build_random_packet(&cfg, 2).unwrap();
        for cfo in [-200e3, -37e3, 0.0, 12.5e3, 150e3, 200e3] {
            let profile = ChannelProfile { cfo_hz: cfo, ..ChannelProfile::identity() };
            let rx_stream = apply_profile(&padded(&tx.samples, 100), &profile).unwrap();
            let trace = receive(&rx_stream, &cfg, &RxConfig::default()).unwrap();
            assert!((trace.cfo_hz() - cfo).abs() < 1.5e3, "{cfo}: {}", trace.cfo_hz());
        }
    }

    #[test]
    fn missing_packet_uses_hint_or_fails() {
        let cfg = PacketConfig::new(Format::Legacy, GuardInterval::Long, 0, 1, false).unwrap();
        let silence = vec![IqSample::ZERO; 1000];
        assert_eq!(receive(&silence, &cfg, &RxConfig::default()), Err(RxError::NotDetected));
        let tx = build_random_packet(&cfg, 3).unwrap();
        let rx = RxConfig { timing_hint: Some(0), ..RxConfig::default() };
        // a truncated stream is reported, not panicked on
        assert!(matches!(receive(&tx.samples[..300], &cfg, &rx), Err(RxError::Sync(_))));
    }

    #[test]
    fn preferred_hint_overrides_detection() {
        let cfg = PacketConfig::new(Format::Ht, GuardInterval::Long, 2, 3, false).unwrap();
        let tx = build_random_packet(&cfg, 8).unwrap();
        let stream = padded(&tx.samples, 100);
        let hinted = RxConfig { timing_hint: Some(100), ..RxConfig::default() };
        let t = receive(&stream, &cfg, &hinted).unwrap();
        assert!(!t.used_hint && t.detection.detected());
        let forced = RxConfig { prefer_hint: true, ..hinted };
        let f = receive(&stream, &cfg, &forced).unwrap();
        assert!(f.used_hint && f.detection.detected());
        assert_eq!(f.start, 100);
        assert_eq!(f.start + f.ltf_index, t.start + t.ltf_index);
    }
}
