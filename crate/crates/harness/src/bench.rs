//! Single-threaded throughput of the full receive chain over an in-memory
//! corpus.

use std::cell::Cell;
use std::fmt;
use std::hint::black_box;
use std::time::{Duration, Instant};

use ofdmrx_core::chanest::Csi;
use ofdmrx_core::channel::{apply_profile, ChannelProfile, Tap};
use ofdmrx_core::equalizer::{EqError, EqualizedSymbol, Equalizer};
use ofdmrx_core::fft64::FreqSymbol;
use ofdmrx_core::frame::{Format, GuardInterval, FFT_LEN};
use ofdmrx_core::numerics::IqSample;
use ofdmrx_core::receiver::{receive_with, Backend, FixedPoint, RxConfig};
use ofdmrx_core::sync::{CfoEstimate, CfoSource, DetectionResult, SyncError};
use ofdmrx_core::txref::{build_random_packet, PacketConfig};

use crate::run::{trial_seed, RunError};

pub const MIN_CORPUS: usize = 10_000_000;
pub const RUNS: usize = 5;
const LEAD: usize = 48;

/// One packet stream and the configuration the receiver is told.
#[derive(Debug, Clone)]
pub struct Capture {
    pub cfg: PacketConfig,
    pub stream: Vec<IqSample>,
}

#[derive(Debug, Clone)]
pub struct Corpus {
    pub captures: Vec<Capture>,
}

impl Corpus {
    /// Mixed formats, GIs and MCSs at 30 dB with CFO and mild multipath,
    /// without SFO,
    /// at least `min_samples` in total.
    pub fn generate(min_samples: usize, seed: u64) -> Result<Self, RunError> {
        let mut captures = Vec::new();
        let mut total = 0;
        let mut i = 0;
        while total < min_samples {
            let s = trial_seed(seed, i);
            let (format, gi) = match i % 3 {
                0 => (Format::Legacy, GuardInterval::Long),
                1 => (Format::Ht, GuardInterval::Long),
                _ => (Format::Ht, GuardInterval::Short),
            };
            let cfg = PacketConfig::new(format, gi, (i % 8) as u8, 100, false)?;
            let tx = build_random_packet(&cfg, s)?;
            let mut stream = vec![IqSample::ZERO; LEAD];
            stream.extend_from_slice(&tx.samples);
            stream.resize(stream.len() + LEAD, IqSample::ZERO);
            let profile = ChannelProfile {
                snr_db: 30.0,
                cfo_hz: (s % 101) as f64 * 1e3 - 50e3,
                sfo_ppm: 0.0,
                taps: vec![Tap::new(0, 0.95, 0.0), Tap::new(2, 0.0, 0.3)],
                seed: s,
            };
            let stream = apply_profile(&stream, &profile)?;
            total += stream.len();
            captures.push(Capture { cfg, stream });
            i += 1;
        }
        Ok(Corpus { captures })
    }

    pub fn samples(&self) -> usize {
        self.captures.iter().map(|c| c.stream.len()).sum()
    }

    /// The first captures holding at least `min_samples`.
    pub fn prefix(&self, min_samples: usize) -> Corpus {
        let mut total = 0;
        let n = self.captures.iter().take_while(|c| {
            let more = total < min_samples;
            total += c.stream.len();
            more
        });
        Corpus { captures: n.cloned().collect() }
    }
}

/// Receives every capture once; returns elapsed time and decode failures.
pub fn pass<B: Backend>(backend: &B, corpus: &Corpus) -> (Duration, usize) {
    let rx = RxConfig::default();
    let mut failures = 0;
    let t = Instant::now();
    for c in &corpus.captures {
        failures += black_box(receive_with(backend, black_box(&c.stream), &c.cfg, &rx)).is_err() as usize;
    }
    (t.elapsed(), failures)
}

fn median(mut v: Vec<f64>) -> f64 {
    v.sort_by(f64::total_cmp);
    v[v.len() / 2]
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BenchStage {
    Detection,
    Cfo,
    Derotation,
    Alignment,
    Fft,
    ChannelEstimate,
    Equalizer,
}

impl BenchStage {
    pub const ALL: [BenchStage; 7] = [
        BenchStage::Detection,
        BenchStage::Cfo,
        BenchStage::Derotation,
        BenchStage::Alignment,
        BenchStage::Fft,
        BenchStage::ChannelEstimate,
        BenchStage::Equalizer,
    ];
}

impl fmt::Display for BenchStage {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            BenchStage::Detection => "detection",
            BenchStage::Cfo => "cfo-estimate",
            BenchStage::Derotation => "derotation",
            BenchStage::Alignment => "ltf-alignment",
            BenchStage::Fft => "fft",
            BenchStage::ChannelEstimate => "channel-estimate",
            BenchStage::Equalizer => "equalizer",
        })
    }
}

/// Backend wrapper accumulating wall time per stage.
#[derive(Debug, Default)]
pub struct Timed<B> {
    inner: B,
    spent: [Cell<Duration>; 7],
}

impl<B: Backend> Timed<B> {
    pub fn new(inner: B) -> Self {
        Timed { inner, spent: Default::default() }
    }

    fn time<T>(&self, stage: BenchStage, f: impl FnOnce(&B) -> T) -> T {
        let t = Instant::now();
        let out = f(&self.inner);
        let c = &self.spent[stage as usize];
        c.set(c.get() + t.elapsed());
        out
    }

    pub fn spent(&self) -> Vec<(BenchStage, Duration)> {
        BenchStage::ALL.iter().map(|&s| (s, self.spent[s as usize].get())).collect()
    }
}

impl<B: Backend> Backend for Timed<B> {
    fn detect(&self, stream: &[IqSample]) -> DetectionResult {
        self.time(BenchStage::Detection, |b| b.detect(stream))
    }

    fn estimate_cfo(
        &self,
        samples: &[IqSample],
        lag: usize,
        terms: usize,
        source: CfoSource,
    ) -> Result<CfoEstimate, SyncError> {
        self.time(BenchStage::Cfo, |b| b.estimate_cfo(samples, lag, terms, source))
    }

    fn derotate(&self, stream: &[IqSample], freq_hz: f64) -> Vec<IqSample> {
        self.time(BenchStage::Derotation, |b| b.derotate(stream, freq_hz))
    }

    fn align_ltf(
        &self,
        stream: &[IqSample],
        detected: usize,
        reference: &[IqSample; FFT_LEN],
    ) -> Result<usize, SyncError> {
        self.time(BenchStage::Alignment, |b| b.align_ltf(stream, detected, reference))
    }

    fn fft(&self, window: &[IqSample; FFT_LEN]) -> FreqSymbol {
        self.time(BenchStage::Fft, |b| b.fft(window))
    }

    fn estimate_legacy(&self, sym1: &FreqSymbol, sym2: &FreqSymbol) -> Csi {
        self.time(BenchStage::ChannelEstimate, |b| b.estimate_legacy(sym1, sym2))
    }

    fn estimate_ht(&self, sym: &FreqSymbol) -> Csi {
        self.time(BenchStage::ChannelEstimate, |b| b.estimate_ht(sym))
    }

    fn smooth(&self, csi: &Csi) -> Csi {
        self.time(BenchStage::ChannelEstimate, |b| b.smooth(csi))
    }

    fn equalize_symbol(&self, eq: &mut Equalizer, sym: &FreqSymbol, csi: &Csi) -> Result<EqualizedSymbol, EqError> {
        self.time(BenchStage::Equalizer, |b| b.equalize_symbol(eq, sym, csi))
    }
}

#[derive(Debug, Clone)]
pub struct BenchReport {
    pub samples: usize,
    pub runs: usize,
    /// Median over `runs` passes.
    pub throughput_msps: f64,
    /// Median rate over twice the corpus; `None` when not measured.
    pub doubled_msps: Option<f64>,
    /// Packets the receiver rejected in one pass.
    pub failures: usize,
    /// Instrumented pass: per-stage time and the pass total.
    pub stages: Vec<(BenchStage, Duration)>,
    pub instrumented_total: Duration,
}

impl BenchReport {
    pub fn stage_sum(&self) -> Duration {
        self.stages.iter().map(|s| s.1).sum()
    }

    /// Relative change of the rate when the corpus doubles.
    pub fn doubling_change(&self) -> Option<f64> {
        self.doubled_msps.map(|d| (d - self.throughput_msps).abs() / self.throughput_msps)
    }
}

impl fmt::Display for BenchReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "corpus           {} samples, {} failures", self.samples, self.failures)?;
        writeln!(f, "throughput       {:.2} Msps (median of {})", self.throughput_msps, self.runs)?;
        if let (Some(d), Some(c)) = (self.doubled_msps, self.doubling_change()) {
            writeln!(f, "doubled corpus   {:.2} Msps ({:+.1}%)", d, 100.0 * c)?;
        }
        let total = self.instrumented_total.as_secs_f64();
        for (s, d) in &self.stages {
            writeln!(f, "  {:<16} {:>8.3} s {:>5.1}%", s.to_string(), d.as_secs_f64(), 100.0 * d.as_secs_f64() / total)?;
        }
        let rest = total - self.stage_sum().as_secs_f64();
        writeln!(f, "  {:<16} {:>8.3} s {:>5.1}%", "other", rest, 100.0 * rest / total)?;
        write!(f, "  {:<16} {:>8.3} s", "total", total)
    }
}

/// Median-of-`runs` throughput over `corpus`, the doubling check when the
/// corpus holds twice `base` samples, and one instrumented pass. Base and
/// doubled passes alternate after one warm-up pass so both see the same
/// machine state.
pub fn bench(corpus: &Corpus, base: usize, runs: usize) -> BenchReport {
    let first = corpus.prefix(base);
    let doubled = corpus.samples() >= 2 * first.samples();
    let rate = |c: &Corpus| {
        let (t, f) = pass(&FixedPoint, c);
        (c.samples() as f64 / t.as_secs_f64() / 1e6, f)
    };
    let (_, failures) = pass(&FixedPoint, &first);
    let mut base_rates = Vec::with_capacity(runs);
    let mut doubled_rates = Vec::with_capacity(runs);
    for _ in 0..runs {
        base_rates.push(rate(&first).0);
        if doubled {
            doubled_rates.push(rate(corpus).0);
        }
    }
    let timed = Timed::new(FixedPoint);
    let (instrumented_total, _) = pass(&timed, &first);
    BenchReport {
        samples: first.samples(),
        runs,
        throughput_msps: median(base_rates),
        doubled_msps: doubled.then(|| median(doubled_rates)),
        failures,
        stages: timed.spent(),
        instrumented_total,
    }
}
