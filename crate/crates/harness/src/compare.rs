//! Differential runs: fixed-point chain against the golden model on
//! identical stimuli.

use std::fmt;

use ofdmrx_core::channel::{apply_profile, ChannelProfile, Tap};
use ofdmrx_core::equalizer::Tracking;
use ofdmrx_core::frame::{Format, GuardInterval};
use ofdmrx_core::golden::{compare, Divergence, Fault, Golden, Stage};
use ofdmrx_core::numerics::IqSample;
use ofdmrx_core::receiver::{receive_with, FixedPoint, RxConfig, RxError, RxTrace};
use ofdmrx_core::txref::{build_random_packet, PacketConfig};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::run::{trial_seed, RunError};

/// One randomized stimulus.
#[derive(Debug, Clone, PartialEq)]
pub struct Case {
    pub seed: u64,
    pub cfg: PacketConfig,
    pub profile: ChannelProfile,
    pub rx: RxConfig,
    pub lead: usize,
}

impl Case {
    /// Everything is drawn from `seed`.
    pub fn random(seed: u64) -> Result<Self, RunError> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let format = if rng.random() { Format::Ht } else { Format::Legacy };
        let gi = if format == Format::Ht && rng.random() { GuardInterval::Short } else { GuardInterval::Long };
        let cfg = PacketConfig::new(format, gi, rng.random_range(0..8), rng.random_range(1..=24), rng.random())?;
        let snr_db = match rng.random_range(0..4) {
            0 => f64::INFINITY,
            _ => rng.random_range(3.0..40.0),
        };
        let n_taps = rng.random_range(1..=3);
        let mut delay = 0;
        let mut taps: Vec<Tap> = (0..n_taps)
            .map(|i| {
                if i > 0 {
                    delay += rng.random_range(1..6);
                }
                let scale = if i == 0 { 1.0 } else { 0.4 };
                Tap::new(delay, scale * rng.random_range(-1.0..1.0), scale * rng.random_range(-1.0..1.0))
            })
            .collect();
        let power: f64 = taps.iter().map(|t| t.gain.norm_sqr()).sum();
        if power > 0.99 {
            let g = (0.99 / power).sqrt();
            taps.iter_mut().for_each(|t| t.gain *= g);
        }
        let profile = ChannelProfile {
            snr_db,
            cfo_hz: rng.random_range(-200e3..200e3),
            sfo_ppm: rng.random_range(-40.0..40.0),
            taps,
            seed,
        };
        let rx = RxConfig {
            legacy_smoothing: rng.random(),
            tracking: if rng.random_ratio(4, 5) { Tracking::Enabled } else { Tracking::Disabled },
            timing_hint: None,
            prefer_hint: false,
        };
        Ok(Case { seed, cfg, profile, rx, lead: rng.random_range(20..400) })
    }

    pub fn stream(&self) -> Result<Vec<IqSample>, RunError> {
        let tx = build_random_packet(&self.cfg, self.seed)?;
        let mut s = vec![IqSample::ZERO; self.lead];
        s.extend_from_slice(&tx.samples);
        s.resize(s.len() + 200, IqSample::ZERO);
        Ok(apply_profile(&s, &self.profile)?)
    }
}

impl fmt::Display for Case {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let p = &self.profile;
        write!(
            f,
            "{} gi={} mcs={} nsym={} smoothing={} | snr={:.1} dB cfo={:.0} Hz sfo={:.1} ppm taps={} | legacy_smoothing={} tracking={:?}",
            self.cfg.format,
            self.cfg.gi,
            self.cfg.mcs,
            self.cfg.nof_ofdm_sym,
            self.cfg.smoothing_recommended,
            p.snr_db,
            p.cfo_hz,
            p.sfo_ppm,
            p.taps.len(),
            self.rx.legacy_smoothing,
            self.rx.tracking,
        )
    }
}

/// Result of running both backends on one stream.
#[derive(Debug, Clone, PartialEq)]
pub enum Verdict {
    Agree,
    /// Both rejected the stream with the same error.
    Rejected,
    Diverged(Divergence),
}

pub fn compare_stream(golden: &Golden, stream: &[IqSample], cfg: &PacketConfig, rx: &RxConfig) -> Verdict {
    let f = receive_with(&FixedPoint, stream, cfg, rx);
    let g = receive_with(golden, stream, cfg, rx);
    match (&f, &g) {
        (Ok(a), Ok(b)) => compare(a, b).map_or(Verdict::Agree, Verdict::Diverged),
        (Err(a), Err(b)) if a == b => Verdict::Rejected,
        _ => Verdict::Diverged(outcome_divergence(&f, &g)),
    }
}

fn outcome_divergence(f: &Result<RxTrace, RxError>, g: &Result<RxTrace, RxError>) -> Divergence {
    let show = |r: &Result<RxTrace, RxError>| match r {
        Ok(_) => "ok".to_string(),
        Err(e) => e.to_string(),
    };
    let stage = match (f, g) {
        (Err(RxError::NotDetected), _) | (_, Err(RxError::NotDetected)) => Stage::Detection,
        (Err(RxError::Eq(_)), _) | (_, Err(RxError::Eq(_))) => Stage::Equalizer,
        _ => Stage::LtfAlignment,
    };
    Divergence {
        stage,
        what: "outcome".into(),
        symbol: None,
        subcarrier: None,
        sample: None,
        fixed: show(f),
        golden: show(g),
    }
}

pub fn fault_name(f: Fault) -> &'static str {
    match f {
        Fault::Derotation => "derotation",
        Fault::Fft => "fft",
        Fault::ChannelEstimate => "channel-estimate",
        Fault::Equalizer => "equalizer",
    }
}

/// The first diverging case of a run.
#[derive(Debug, Clone, PartialEq)]
pub struct Finding {
    pub index: usize,
    pub case: Case,
    pub divergence: Divergence,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CompareReport {
    pub seed: u64,
    pub fault: Option<Fault>,
    pub packets: usize,
    /// Cases both backends rejected identically.
    pub rejected: usize,
    pub finding: Option<Finding>,
}

impl fmt::Display for CompareReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match &self.finding {
            None => write!(
                f,
                "seed {}: {} packets, 0 divergences ({} rejected by both)",
                self.seed, self.packets, self.rejected
            ),
            Some(d) => {
                writeln!(f, "seed {}: divergence in packet {} of {}", self.seed, d.index, self.packets)?;
                writeln!(f, "  {}", d.divergence)?;
                writeln!(f, "  case: {}", d.case)?;
                write!(f, "  repro: ofdmrx compare --seed {} --trials {}", self.seed, d.index + 1)?;
                match self.fault {
                    Some(x) => write!(f, " --fault {}", fault_name(x)),
                    None => Ok(()),
                }
            }
        }
    }
}

/// Runs `packets` random cases drawn from `seed`; stops at the first
/// divergence.
pub fn run_compare(seed: u64, packets: usize, fault: Option<Fault>) -> Result<CompareReport, RunError> {
    let golden = Golden { fault };
    let mut rejected = 0;
    for index in 0..packets {
        let case = Case::random(trial_seed(seed, index))?;
        let stream = case.stream()?;
        match compare_stream(&golden, &stream, &case.cfg, &case.rx) {
            Verdict::Agree => {}
            Verdict::Rejected => rejected += 1,
            Verdict::Diverged(divergence) => {
                let finding = Some(Finding { index, case, divergence });
                return Ok(CompareReport { seed, fault, packets: index + 1, rejected, finding });
            }
        }
    }
    Ok(CompareReport { seed, fault, packets, rejected, finding: None })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn random_cases_agree() {
        let r = run_compare(11, 40, None).unwrap();
        assert_eq!(r.finding, None, "{r}");
        assert!(r.rejected < 40);
    }

    #[test]
    fn cases_cover_the_configuration_space() {
        let cases: Vec<Case> = (0..200).map(|i| Case::random(trial_seed(2, i)).unwrap()).collect();
        for mcs in 0..8 {
            assert!(cases.iter().any(|c| c.cfg.mcs == mcs));
        }
        assert!(cases.iter().any(|c| c.cfg.gi == GuardInterval::Short));
        assert!(cases.iter().any(|c| c.cfg.format == Format::Legacy));
        assert!(cases.iter().any(|c| c.profile.snr_db.is_infinite()));
        assert!(cases.iter().any(|c| c.rx.tracking == Tracking::Disabled));
        assert!(cases.iter().any(|c| c.profile.taps.len() == 3));
        assert_eq!(Case::random(5).unwrap(), Case::random(5).unwrap());
    }

    #[test]
    fn injected_faults_are_localized_and_reproducible() {
        for (fault, stage) in [
            (Fault::Derotation, Stage::Derotation),
            (Fault::Fft, Stage::Fft),
            (Fault::ChannelEstimate, Stage::ChannelEstimate),
            (Fault::Equalizer, Stage::Equalizer),
        ] {
            let r = run_compare(4, 20, Some(fault)).unwrap();
            let d = &r.finding.as_ref().expect("fault detected").divergence;
            assert_eq!(d.stage, stage, "{r}");
            assert_eq!(run_compare(4, 20, Some(fault)).unwrap(), r);
            assert!(r.to_string().contains("--seed 4"));
        }
    }
}
