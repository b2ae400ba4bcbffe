//! Reference transmitter producing uncoded Legacy and HT packets.

mod constellation;
mod tables;

pub use constellation::Modulation;
pub use tables::{
    htltf_sign, lltf_sign, lstf_value, polarity, RefSequences, LLTF, LSTF, PILOT_BASE, POLARITY,
    POLARITY_PERIOD,
};

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use std::f64::consts::TAU;
use std::sync::OnceLock;
use thiserror::Error;

use crate::frame::{
    bin_of, data_indices, signal_symbols, Format, FrameLayout, GuardInterval, FFT_LEN,
    PILOT_INDICES,
};
use crate::numerics::IqSample;

/// Per-subcarrier amplitude of the standalone field builders. 52 unit tones
/// at 1/168 keep every time-domain component within 52/168 < 0.5 of full
/// scale, and the boosted STF tones (√(26/3) each, 12 of them) stay below 0.22.
pub const TX_AMPLITUDE: f64 = 1.0 / 168.0;

/// Peak sample magnitude of a built packet, one LSB under half scale.
pub const PACKET_PEAK: f64 = 16383.0 / 32768.0;

pub const MAX_OFDM_SYMBOLS: u16 = 4095;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum TxError {
    #[error("mcs {0} out of range 0..=7")]
    Mcs(u8),
    #[error("nof_ofdm_sym {0} out of range 1..=4095")]
    SymbolCount(usize),
    #[error("legacy packets require the long guard interval")]
    LegacyShortGi,
    #[error("expected {expected} data points, got {got}")]
    PointCount { expected: usize, got: usize },
    #[error("expected {expected} payload symbols, got {got}")]
    SymbolMismatch { expected: usize, got: usize },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct PacketConfig {
    pub format: Format,
    pub gi: GuardInterval,
    pub mcs: u8,
    pub nof_ofdm_sym: u16,
    /// HT-SIG smoothing bit; ignored for Legacy.
    pub smoothing_recommended: bool,
}

impl PacketConfig {
    pub fn new(
        format: Format,
        gi: GuardInterval,
        mcs: u8,
        nof_ofdm_sym: usize,
        smoothing_recommended: bool,
    ) -> Result<Self, TxError> {
        let cfg = PacketConfig {
            format,
            gi,
            mcs,
            nof_ofdm_sym: u16::try_from(nof_ofdm_sym).unwrap_or(u16::MAX),
            smoothing_recommended,
        };
        if !(1..=MAX_OFDM_SYMBOLS as usize).contains(&nof_ofdm_sym) {
            return Err(TxError::SymbolCount(nof_ofdm_sym));
        }
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<(), TxError> {
        if self.mcs > 7 {
            return Err(TxError::Mcs(self.mcs));
        }
        if !(1..=MAX_OFDM_SYMBOLS).contains(&self.nof_ofdm_sym) {
            return Err(TxError::SymbolCount(self.nof_ofdm_sym as usize));
        }
        if self.format == Format::Legacy && self.gi == GuardInterval::Short {
            return Err(TxError::LegacyShortGi);
        }
        Ok(())
    }

    pub fn modulation(&self) -> Modulation {
        Modulation::for_mcs(self.format, self.mcs).expect("validated mcs")
    }

    pub fn layout(&self) -> FrameLayout {
        FrameLayout::new(self.format, self.gi, self.nof_ofdm_sym as usize)
    }

    /// Polarity index of data symbol `j`; index 0 is the first symbol after the L-LTF.
    pub fn data_polarity_index(&self, j: usize) -> usize {
        signal_symbols(self.format) + j
    }
}

// e^{+j2πm/64}
fn inverse_twiddles() -> &'static [Complex64; FFT_LEN] {
    static T: OnceLock<[Complex64; FFT_LEN]> = OnceLock::new();
    T.get_or_init(|| std::array::from_fn(|m| Complex64::from_polar(1.0, TAU * m as f64 / 64.0)))
}

/// One 64-sample period of the inverse DFT of `freq` (bin order), scaled by TX_AMPLITUDE.
pub fn ofdm_period(freq: &[Complex64; FFT_LEN]) -> [Complex64; FFT_LEN] {
    let w = inverse_twiddles();
    let active: Vec<(usize, Complex64)> = freq
        .iter()
        .enumerate()
        .filter(|(_, v)| v.re != 0.0 || v.im != 0.0)
        .map(|(b, &v)| (b, v * TX_AMPLITUDE))
        .collect();
    std::array::from_fn(|n| active.iter().map(|&(b, v)| v * w[(b * n) % FFT_LEN]).sum())
}

/// `freq` with a cyclic prefix of `gi` samples and `len` total samples, the
/// body repeating with period 64.
fn cyclic_f64(freq: &[Complex64; FFT_LEN], gi: usize, len: usize) -> Vec<Complex64> {
    let period = ofdm_period(freq);
    (0..len).map(|m| period[(m + FFT_LEN - gi % FFT_LEN) % FFT_LEN]).collect()
}

fn freq_table(f: impl Fn(i32) -> Complex64) -> [Complex64; FFT_LEN] {
    let mut t = [Complex64::default(); FFT_LEN];
    for k in -32..32 {
        t[bin_of(k)] = f(k);
    }
    t
}

fn stf_f64() -> Vec<Complex64> {
    cyclic_f64(&freq_table(lstf_value), 0, 160)
}

fn ltf_f64(format: Format) -> Vec<Complex64> {
    match format {
        Format::Legacy => cyclic_f64(&freq_table(|k| Complex64::from(lltf_sign(k) as f64)), 32, 160),
        Format::Ht => cyclic_f64(&freq_table(|k| Complex64::from(htltf_sign(k) as f64)), 16, 80),
    }
}

/// Legacy short training field: 160 samples, period 16.
pub fn build_stf() -> Vec<IqSample> {
    stf_f64().into_iter().map(IqSample::from_complex).collect()
}

/// Legacy: 32-sample GI plus two identical 64-sample symbols. HT: 16-sample GI plus one.
pub fn build_ltf(format: Format) -> Vec<IqSample> {
    ltf_f64(format).into_iter().map(IqSample::from_complex).collect()
}

/// The 64-sample L-LTF period used as the timing reference.
pub fn ltf_reference() -> [IqSample; FFT_LEN] {
    let s = build_ltf(Format::Legacy);
    std::array::from_fn(|n| s[32 + n])
}

fn symbol_freq(format: Format, points: &[Complex64], polarity_index: usize) -> [Complex64; FFT_LEN] {
    let mut t = [Complex64::default(); FFT_LEN];
    for (&k, &p) in data_indices(format).iter().zip(points) {
        t[bin_of(k)] = p;
    }
    let pol = polarity(polarity_index) as f64;
    for (&k, &b) in PILOT_INDICES.iter().zip(&PILOT_BASE) {
        t[bin_of(k)] = Complex64::new(pol * b as f64, 0.0);
    }
    t
}

fn symbol_f64(
    format: Format,
    gi: GuardInterval,
    points: &[Complex64],
    polarity_index: usize,
) -> Result<Vec<Complex64>, TxError> {
    let expected = format.data_count();
    if points.len() != expected {
        return Err(TxError::PointCount { expected, got: points.len() });
    }
    Ok(cyclic_f64(&symbol_freq(format, points, polarity_index), gi.len(), gi.symbol_len()))
}

/// One GI-prefixed data symbol; pilots take polarity `POLARITY[sym_index mod 127]`.
pub fn build_data_symbol(
    points: &[Complex64],
    sym_index: usize,
    cfg: &PacketConfig,
) -> Result<Vec<IqSample>, TxError> {
    cfg.validate()?;
    let s = symbol_f64(cfg.format, cfg.gi, points, sym_index)?;
    Ok(s.into_iter().map(IqSample::from_complex).collect())
}

/// Fixed BPSK content of SIG symbol `s`, drawn from the polarity sequence.
pub fn signal_points(s: usize) -> Vec<Complex64> {
    (0..Format::Legacy.data_count())
        .map(|k| Complex64::new(polarity(37 * s + 5 * k + 11) as f64, 0.0))
        .collect()
}

/// Quantized packet samples and the per-subcarrier amplitude they carry.
#[derive(Debug, Clone, PartialEq)]
pub struct Waveform {
    pub samples: Vec<IqSample>,
    /// Full-scale amplitude of a unit constellation point on one subcarrier.
    pub amplitude: f64,
}

/// Full packet: STF ‖ L-LTF ‖ SIG symbols ‖ (HT-LTF) ‖ data, scaled so the
/// largest sample magnitude equals [`PACKET_PEAK`].
pub fn build_packet(cfg: &PacketConfig, payload: &[Vec<Complex64>]) -> Result<Waveform, TxError> {
    cfg.validate()?;
    if payload.len() != cfg.nof_ofdm_sym as usize {
        return Err(TxError::SymbolMismatch { expected: cfg.nof_ofdm_sym as usize, got: payload.len() });
    }
    let layout = cfg.layout();
    let mut out = Vec::with_capacity(layout.len);
    out.extend(stf_f64());
    out.extend(ltf_f64(Format::Legacy));
    for s in 0..signal_symbols(cfg.format) {
        out.extend(symbol_f64(Format::Legacy, GuardInterval::Long, &signal_points(s), s)?);
    }
    if cfg.format == Format::Ht {
        out.extend(ltf_f64(Format::Ht));
    }
    for (j, points) in payload.iter().enumerate() {
        out.extend(symbol_f64(cfg.format, cfg.gi, points, cfg.data_polarity_index(j))?);
    }
    debug_assert_eq!(out.len(), layout.len);
    let peak = out.iter().map(|z| z.norm()).fold(0.0, f64::max);
    let gain = PACKET_PEAK / peak;
    Ok(Waveform {
        samples: out.into_iter().map(|z| IqSample::from_complex(z * gain)).collect(),
        amplitude: TX_AMPLITUDE * gain,
    })
}

/// A generated packet with its ground truth.
#[derive(Debug, Clone, PartialEq)]
pub struct TxPacket {
    pub cfg: PacketConfig,
    /// Constellation indices per data symbol and data subcarrier.
    pub symbols: Vec<Vec<usize>>,
    pub points: Vec<Vec<Complex64>>,
    pub samples: Vec<IqSample>,
    pub amplitude: f64,
}

/// Uniform random constellation indices for every data subcarrier.
pub fn random_symbols(cfg: &PacketConfig, seed: u64) -> Vec<Vec<usize>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let order = cfg.modulation().order();
    (0..cfg.nof_ofdm_sym)
        .map(|_| (0..cfg.format.data_count()).map(|_| rng.random_range(0..order)).collect())
        .collect()
}

/// Packet with a random payload; identical for identical (cfg, seed).
pub fn build_random_packet(cfg: &PacketConfig, seed: u64) -> Result<TxPacket, TxError> {
    cfg.validate()?;
    let m = cfg.modulation();
    let symbols = random_symbols(cfg, seed);
    let points: Vec<Vec<Complex64>> =
        symbols.iter().map(|s| s.iter().map(|&i| m.point(i)).collect()).collect();
    let Waveform { samples, amplitude } = build_packet(cfg, &points)?;
    Ok(TxPacket { cfg: *cfg, symbols, points, samples, amplitude })
}
