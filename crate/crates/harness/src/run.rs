//! Trial generation, receive runs and metric accumulation.

use std::fmt;
use std::time::{Duration, Instant};

use num_complex::Complex64;
use ofdmrx_core::channel::{apply_profile, ChannelError};
use ofdmrx_core::equalizer::EqualizedSymbol;
use ofdmrx_core::numerics::IqSample;
use ofdmrx_core::receiver::{receive, RxError, RxTrace};
use ofdmrx_core::sync::detect_packet;
use ofdmrx_core::txref::{build_random_packet, Modulation, TxError, TxPacket};
use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::config::RunConfig;

#[derive(Debug, Error)]
pub enum RunError {
    #[error("packet: {0}")]
    Tx(#[from] TxError),
    #[error("channel: {0}")]
    Channel(#[from] ChannelError),
    #[error("receiver: {0}")]
    Rx(#[from] RxError),
}

/// Seed of trial `index`: word `index` of the ChaCha stream keyed by `seed`.
pub fn trial_seed(seed: u64, index: usize) -> u64 {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_word_pos(2 * index as u128);
    rng.next_u64()
}

/// One transmitted packet and what the receiver sees.
#[derive(Debug, Clone)]
pub struct Trial {
    pub index: usize,
    pub seed: u64,
    pub tx: TxPacket,
    /// Index of the first packet sample in `stream`.
    pub start: usize,
    pub stream: Vec<IqSample>,
}

/// The clean packet of a trial, padded with the configured lead and tail.
pub fn clean_stream(cfg: &RunConfig, tx: &TxPacket) -> Vec<IqSample> {
    let mut s = vec![IqSample::ZERO; cfg.packet.lead];
    s.extend_from_slice(&tx.samples);
    s.resize(s.len() + cfg.packet.tail, IqSample::ZERO);
    s
}

pub fn transmit(cfg: &RunConfig, index: usize) -> Result<TxPacket, RunError> {
    Ok(build_random_packet(&cfg.packet_config()?, trial_seed(cfg.seed, index))?)
}

pub fn make_trial(cfg: &RunConfig, index: usize) -> Result<Trial, RunError> {
    let seed = trial_seed(cfg.seed, index);
    let tx = build_random_packet(&cfg.packet_config()?, seed)?;
    let stream = apply_profile(&clean_stream(cfg, &tx), &cfg.profile(seed))?;
    Ok(Trial { index, seed, tx, start: cfg.packet.lead, stream })
}

/// Symbol errors of one constellation.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SerCount {
    pub modulation: Modulation,
    pub errors: u64,
    pub total: u64,
}

impl SerCount {
    pub fn ratio(&self) -> f64 {
        if self.total == 0 {
            0.0
        } else {
            self.errors as f64 / self.total as f64
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MetricsReport {
    pub seed: u64,
    pub packets: usize,
    pub detected: usize,
    /// Packets the chain could not process at all.
    pub failed: usize,
    pub detect_rate: f64,
    /// Aggregate EVM over all data points, dB.
    pub evm_db: f64,
    /// EVM per data symbol position, dB.
    pub evm_db_per_symbol: Vec<f64>,
    /// Data points per constellation.
    pub ser: Vec<SerCount>,
    /// RMS of estimated minus true CFO over processed packets.
    pub residual_cfo_hz: f64,
    /// Input samples over receiver time.
    pub throughput_msps: f64,
}

impl MetricsReport {
    pub fn ser_of(&self, m: Modulation) -> Option<f64> {
        self.ser.iter().find(|c| c.modulation == m).map(SerCount::ratio)
    }
}

impl fmt::Display for MetricsReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "seed             {}", self.seed)?;
        writeln!(f, "packets          {} ({} failed)", self.packets, self.failed)?;
        writeln!(f, "detect_rate      {:.4}", self.detect_rate)?;
        writeln!(f, "evm_db           {:.2}", self.evm_db)?;
        for c in &self.ser {
            writeln!(f, "ser {:<12} {:.6} ({}/{})", c.modulation.to_string(), c.ratio(), c.errors, c.total)?;
        }
        writeln!(f, "residual_cfo_hz  {:.1}", self.residual_cfo_hz)?;
        write!(f, "throughput_msps  {:.2}", self.throughput_msps)
    }
}

#[derive(Debug, Clone, Default)]
struct EvmSum {
    err: f64,
    n: u64,
}

impl EvmSum {
    fn db(&self) -> f64 {
        if self.n == 0 {
            f64::NAN
        } else {
            10.0 * (self.err / self.n as f64).log10()
        }
    }
}

/// Running totals over packets.
#[derive(Debug, Clone)]
pub struct Metrics {
    seed: u64,
    packets: usize,
    detected: usize,
    failed: usize,
    evm: EvmSum,
    per_symbol: Vec<EvmSum>,
    ser: Vec<SerCount>,
    cfo_sq: f64,
    cfo_n: usize,
    samples: usize,
    rx_time: Duration,
}

impl Metrics {
    pub fn new(seed: u64) -> Self {
        Metrics {
            seed,
            packets: 0,
            detected: 0,
            failed: 0,
            evm: EvmSum::default(),
            per_symbol: Vec::new(),
            ser: Vec::new(),
            cfo_sq: 0.0,
            cfo_n: 0,
            samples: 0,
            rx_time: Duration::ZERO,
        }
    }

    fn count(&mut self, m: Modulation, errors: u64, total: u64) {
        match self.ser.iter_mut().find(|c| c.modulation == m) {
            Some(c) => {
                c.errors += errors;
                c.total += total;
            }
            None => {
                self.ser.push(SerCount { modulation: m, errors, total });
                self.ser.sort_by_key(|c| Modulation::ALL.iter().position(|&x| x == c.modulation));
            }
        }
    }

    /// Adds one packet. A failed receive counts every data point as an error.
    pub fn add(&mut self, tx: &TxPacket, detected: bool, outcome: &Result<RxTrace, RxError>, true_cfo_hz: f64) {
        self.packets += 1;
        self.detected += detected as usize;
        let m = tx.cfg.modulation();
        let trace = match outcome {
            Ok(t) => t,
            Err(_) => {
                self.failed += 1;
                let n = tx.symbols.iter().map(Vec::len).sum::<usize>() as u64;
                self.count(m, n, n);
                return;
            }
        };
        let err = trace.cfo_hz() - true_cfo_hz;
        self.cfo_sq += err * err;
        self.cfo_n += 1;
        if self.per_symbol.len() < trace.data.len() {
            self.per_symbol.resize(trace.data.len(), EvmSum::default());
        }
        let (mut errors, mut total) = (0, 0);
        for (j, (sym, (want, idx))) in trace.data.iter().zip(tx.points.iter().zip(&tx.symbols)).enumerate() {
            for ((p, &w), &i) in sym.points.iter().zip(want).zip(idx) {
                let z = p.to_complex();
                let e = (z - w).norm_sqr();
                self.evm.err += e;
                self.evm.n += 1;
                self.per_symbol[j].err += e;
                self.per_symbol[j].n += 1;
                errors += (m.decide(z) != i) as u64;
                total += 1;
            }
        }
        self.count(m, errors, total);
    }

    pub fn add_timing(&mut self, samples: usize, elapsed: Duration) {
        self.samples += samples;
        self.rx_time += elapsed;
    }

    pub fn report(&self) -> MetricsReport {
        let secs = self.rx_time.as_secs_f64();
        MetricsReport {
            seed: self.seed,
            packets: self.packets,
            detected: self.detected,
            failed: self.failed,
            detect_rate: if self.packets == 0 { 0.0 } else { self.detected as f64 / self.packets as f64 },
            evm_db: self.evm.db(),
            evm_db_per_symbol: self.per_symbol.iter().map(EvmSum::db).collect(),
            ser: self.ser.clone(),
            residual_cfo_hz: if self.cfo_n == 0 { f64::NAN } else { (self.cfo_sq / self.cfo_n as f64).sqrt() },
            throughput_msps: if secs > 0.0 { self.samples as f64 / secs / 1e6 } else { 0.0 },
        }
    }
}

/// Receives one trial; returns the trace or the chain error.
pub fn run_trial(cfg: &RunConfig, trial: &Trial, metrics: &mut Metrics) -> Result<RxTrace, RxError> {
    let rx = cfg.rx_config(trial.start);
    let t = Instant::now();
    let outcome = receive(&trial.stream, &trial.tx.cfg, &rx);
    metrics.add_timing(trial.stream.len(), t.elapsed());
    let detected = match &outcome {
        Ok(t) => t.detection.detected(),
        Err(RxError::NotDetected) => false,
        Err(_) => detect_packet(&trial.stream).detected(),
    };
    metrics.add(&trial.tx, detected, &outcome, cfg.channel.cfo_hz);
    outcome
}

/// Monte-Carlo run of `cfg.trials` independent trials.
pub fn run_trials(cfg: &RunConfig) -> Result<MetricsReport, RunError> {
    let mut metrics = Metrics::new(cfg.seed);
    for i in 0..cfg.trials {
        let trial = make_trial(cfg, i)?;
        let _ = run_trial(cfg, &trial, &mut metrics);
    }
    Ok(metrics.report())
}

/// Receives a captured stream whose payload is trial 0 of `cfg`.
pub fn run_rx(cfg: &RunConfig, stream: &[IqSample]) -> Result<(Vec<EqualizedSymbol>, MetricsReport), RunError> {
    let tx = transmit(cfg, 0)?;
    let trial = Trial { index: 0, seed: trial_seed(cfg.seed, 0), tx, start: cfg.packet.lead, stream: stream.to_vec() };
    let mut metrics = Metrics::new(cfg.seed);
    let trace = run_trial(cfg, &trial, &mut metrics)?;
    Ok((trace.data, metrics.report()))
}

/// Mean of `points` against `want` in dB.
pub fn evm_db(points: &[Complex64], want: &[Complex64]) -> f64 {
    let e: f64 = points.iter().zip(want).map(|(p, w)| (p - w).norm_sqr()).sum();
    10.0 * (e / points.len() as f64).log10()
}
