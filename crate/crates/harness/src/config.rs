//! Run configuration: one TOML file, every field overridable from the CLI.

use std::path::{Path, PathBuf};

use ofdmrx_core::channel::{ChannelError, ChannelProfile, Tap};
use ofdmrx_core::equalizer::Tracking;
use ofdmrx_core::frame::{Format, GuardInterval};
use ofdmrx_core::receiver::RxConfig;
use ofdmrx_core::txref::{PacketConfig, TxError};
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("{path}: {source}")]
    Io { path: String, source: std::io::Error },
    #[error("config syntax: {0}")]
    Parse(#[from] toml::de::Error),
    #[error("packet: {0}")]
    Packet(#[from] TxError),
    #[error("channel: {0}")]
    Channel(#[from] ChannelError),
    #[error("{field}: {message}")]
    Field { field: &'static str, message: String },
}

mod text {
    use serde::{de::Error, Deserialize, Deserializer, Serializer};
    use std::fmt::Display;
    use std::str::FromStr;

    pub fn serialize<T: Display, S: Serializer>(v: &T, s: S) -> Result<S::Ok, S::Error> {
        s.collect_str(v)
    }

    pub fn deserialize<'de, T, D>(d: D) -> Result<T, D::Error>
    where
        T: FromStr,
        T::Err: Display,
        D: Deserializer<'de>,
    {
        String::deserialize(d)?.parse().map_err(D::Error::custom)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PacketSection {
    #[serde(with = "text")]
    pub format: Format,
    #[serde(with = "text", default = "long_gi")]
    pub gi: GuardInterval,
    pub mcs: u8,
    pub nof_ofdm_sym: usize,
    #[serde(default)]
    pub smoothing_recommended: bool,
    /// Zero samples before the packet; the true packet start.
    #[serde(default = "default_lead")]
    pub lead: usize,
    /// Zero samples after the packet.
    #[serde(default = "default_lead")]
    pub tail: usize,
}

fn long_gi() -> GuardInterval {
    GuardInterval::Long
}

fn default_lead() -> usize {
    200
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ChannelSection {
    /// `inf` disables noise.
    #[serde(default = "infinite")]
    pub snr_db: f64,
    #[serde(default)]
    pub cfo_hz: f64,
    #[serde(default)]
    pub sfo_ppm: f64,
    /// [delay, re, im] per tap.
    #[serde(default = "unit_tap")]
    pub taps: Vec<(usize, f64, f64)>,
}

fn infinite() -> f64 {
    f64::INFINITY
}

fn unit_tap() -> Vec<(usize, f64, f64)> {
    vec![(0, 1.0, 0.0)]
}

impl Default for ChannelSection {
    fn default() -> Self {
        ChannelSection { snr_db: infinite(), cfo_hz: 0.0, sfo_ppm: 0.0, taps: unit_tap() }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RxSection {
    #[serde(default)]
    pub legacy_smoothing: bool,
    #[serde(default = "yes")]
    pub tracking: bool,
    /// Fall back to the true packet start when detection misses.
    #[serde(default = "yes")]
    pub timing_fallback: bool,
    /// Always time from the true packet start; detection still runs and is
    /// reported.
    #[serde(default)]
    pub genie_timing: bool,
}

fn yes() -> bool {
    true
}

impl Default for RxSection {
    fn default() -> Self {
        RxSection { legacy_smoothing: false, tracking: true, timing_fallback: true, genie_timing: false }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputSection {
    pub points_csv: Option<PathBuf>,
    pub metrics_csv: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    #[serde(default = "default_seed")]
    pub seed: u64,
    #[serde(default = "default_trials")]
    pub trials: usize,
    pub packet: PacketSection,
    #[serde(default)]
    pub channel: ChannelSection,
    #[serde(default)]
    pub rx: RxSection,
    #[serde(default)]
    pub output: OutputSection,
}

fn default_seed() -> u64 {
    1
}

fn default_trials() -> usize {
    1
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            seed: default_seed(),
            trials: default_trials(),
            packet: PacketSection {
                format: Format::Ht,
                gi: GuardInterval::Long,
                mcs: 0,
                nof_ofdm_sym: 10,
                smoothing_recommended: false,
                lead: default_lead(),
                tail: default_lead(),
            },
            channel: ChannelSection::default(),
            rx: RxSection::default(),
            output: OutputSection::default(),
        }
    }
}

impl RunConfig {
    /// Parses and validates.
    pub fn from_toml(text: &str) -> Result<Self, ConfigError> {
        let cfg: RunConfig = toml::from_str(text)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path)
            .map_err(|source| ConfigError::Io { path: path.display().to_string(), source })?;
        Self::from_toml(&text)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        if self.trials == 0 {
            return Err(ConfigError::Field { field: "trials", message: "must be at least 1".into() });
        }
        self.packet_config()?;
        self.profile(0).validate()?;
        Ok(())
    }

    pub fn packet_config(&self) -> Result<PacketConfig, TxError> {
        let p = &self.packet;
        PacketConfig::new(p.format, p.gi, p.mcs, p.nof_ofdm_sym, p.smoothing_recommended)
    }

    /// Channel of one trial; the noise seed is the trial seed.
    pub fn profile(&self, seed: u64) -> ChannelProfile {
        let c = &self.channel;
        ChannelProfile {
            snr_db: c.snr_db,
            cfo_hz: c.cfo_hz,
            sfo_ppm: c.sfo_ppm,
            taps: c.taps.iter().map(|&(d, re, im)| Tap::new(d, re, im)).collect(),
            seed,
        }
    }

    /// Receiver settings; `true_start` is the hint used when detection misses.
    pub fn rx_config(&self, true_start: usize) -> RxConfig {
        RxConfig {
            legacy_smoothing: self.rx.legacy_smoothing,
            tracking: if self.rx.tracking { Tracking::Enabled } else { Tracking::Disabled },
            timing_hint: (self.rx.timing_fallback || self.rx.genie_timing).then_some(true_start),
            prefer_hint: self.rx.genie_timing,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const FULL: &str = r#"
seed = 7
trials = 20

[packet]
format = "legacy"
mcs = 5
nof_ofdm_sym = 12

[channel]
snr_db = inf
cfo_hz = 25e3
sfo_ppm = -10
taps = [[0, 0.9, 0.0], [3, 0.0, 0.3]]

[rx]
tracking = false

[output]
points_csv = "eq.csv"
"#;

    #[test]
    fn parses_with_defaults() {
        let c = RunConfig::from_toml(FULL).unwrap();
        assert_eq!((c.seed, c.trials), (7, 20));
        assert_eq!(c.packet.format, Format::Legacy);
        assert_eq!(c.packet.gi, GuardInterval::Long);
        assert!(c.channel.snr_db.is_infinite());
        assert_eq!(c.profile(3).taps.len(), 2);
        assert_eq!(c.profile(3).seed, 3);
        assert_eq!(c.rx_config(200).tracking, Tracking::Disabled);
        assert_eq!(c.rx_config(200).timing_hint, Some(200));
        assert!(!c.rx_config(200).prefer_hint);
        assert_eq!(c.output.points_csv.as_deref(), Some(Path::new("eq.csv")));
        assert_eq!(c.packet_config().unwrap().mcs, 5);
    }

    #[test]
    fn round_trips_through_toml() {
        let c = RunConfig::from_toml(FULL).unwrap();
        assert_eq!(RunConfig::from_toml(&c.to_toml()).unwrap(), c);
        let d = RunConfig::default();
        assert_eq!(RunConfig::from_toml(&d.to_toml()).unwrap(), d);
    }

    #[test]
    fn rejects_invalid_configs() {
        let bad = |s: &str| RunConfig::from_toml(s).unwrap_err().to_string();
        assert!(bad("[packet]\nformat = \"vht\"\nmcs = 0\nnof_ofdm_sym = 1").contains("vht"));
        assert!(bad("[packet]\nformat = \"ht\"\nmcs = 9\nnof_ofdm_sym = 1").contains("mcs"));
        assert!(bad("[packet]\nformat = \"legacy\"\ngi = \"short\"\nmcs = 0\nnof_ofdm_sym = 1").contains("guard"));
        assert!(bad("trials = 0\n[packet]\nformat = \"ht\"\nmcs = 0\nnof_ofdm_sym = 1").contains("trials"));
        assert!(bad("[packet]\nformat = \"ht\"\nmcs = 0\nnof_ofdm_sym = 1\ncolour = 3").contains("colour"));
        assert!(bad("[packet]\nformat = \"ht\"\nmcs = 0\nnof_ofdm_sym = 1\n[channel]\ntaps = []").contains("channel"));
    }
}
