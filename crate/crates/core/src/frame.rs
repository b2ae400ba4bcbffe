//! Packet-level vocabulary shared by transmitter and receiver: formats,
//! guard intervals, subcarrier sets and the sample layout of a packet.

use std::fmt;
use std::str::FromStr;

/// Sample rate of the baseband, in Hz.
pub const SAMPLE_RATE_HZ: f64 = 20e6;
pub const FFT_LEN: usize = 64;
pub const STF_LEN: usize = 160;
pub const LEGACY_LTF_LEN: usize = 160;
pub const HT_LTF_LEN: usize = 80;
/// Long-GI symbol length; SIG symbols and the HT-LTF always use it.
pub const LONG_SYMBOL_LEN: usize = 80;

/// Subcarrier indices carrying pilots.
pub const PILOT_INDICES: [i32; 4] = [-21, -7, 7, 21];
/// Σ i² over the pilot set.
pub const PILOT_INDEX_ENERGY: i64 = 980;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Format {
    Legacy,
    Ht,
}

impl Format {
    pub fn active_count(self) -> usize {
        match self {
            Format::Legacy => 52,
            Format::Ht => 56,
        }
    }

    pub fn data_count(self) -> usize {
        self.active_count() - PILOT_INDICES.len()
    }

    /// Highest active subcarrier index.
    pub fn edge(self) -> i32 {
        match self {
            Format::Legacy => 26,
            Format::Ht => 28,
        }
    }
}

impl fmt::Display for Format {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Format::Legacy => "legacy",
            Format::Ht => "ht",
        })
    }
}

impl FromStr for Format {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "legacy" => Ok(Format::Legacy),
            "ht" => Ok(Format::Ht),
            other => Err(format!("unknown format '{other}' (expected legacy or ht)")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum GuardInterval {
    Long,
    Short,
}

impl GuardInterval {
    pub fn len(self) -> usize {
        match self {
            GuardInterval::Long => 16,
            GuardInterval::Short => 8,
        }
    }

    pub fn symbol_len(self) -> usize {
        FFT_LEN + self.len()
    }
}

impl fmt::Display for GuardInterval {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            GuardInterval::Long => "long",
            GuardInterval::Short => "short",
        })
    }
}

impl FromStr for GuardInterval {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "long" => Ok(GuardInterval::Long),
            "short" => Ok(GuardInterval::Short),
            other => Err(format!("unknown guard interval '{other}' (expected long or short)")),
        }
    }
}

/// One entry of an active-subcarrier table.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Subcarrier {
    pub index: i32,
    pub pilot: bool,
}

const fn is_pilot(k: i32) -> bool {
    k == -21 || k == -7 || k == 7 || k == 21
}

const fn active_table<const N: usize>(edge: i32) -> [Subcarrier; N] {
    let mut out = [Subcarrier { index: 0, pilot: false }; N];
    let mut k = -edge;
    let mut n = 0;
    while k <= edge {
        if k != 0 {
            out[n] = Subcarrier { index: k, pilot: is_pilot(k) };
            n += 1;
        }
        k += 1;
    }
    out
}

const fn data_table<const N: usize>(edge: i32) -> [i32; N] {
    let mut out = [0; N];
    let mut k = -edge;
    let mut n = 0;
    while k <= edge {
        if k != 0 && !is_pilot(k) {
            out[n] = k;
            n += 1;
        }
        k += 1;
    }
    out
}

static LEGACY_ACTIVE: [Subcarrier; 52] = active_table(26);
static HT_ACTIVE: [Subcarrier; 56] = active_table(28);
static LEGACY_DATA: [i32; 48] = data_table(26);
static HT_DATA: [i32; 52] = data_table(28);

/// Active subcarriers in ascending index order, pilots flagged.
pub fn active_subcarriers(format: Format) -> &'static [Subcarrier] {
    match format {
        Format::Legacy => &LEGACY_ACTIVE,
        Format::Ht => &HT_ACTIVE,
    }
}

/// Active subcarrier indices in ascending order.
pub fn active_indices(format: Format) -> impl Iterator<Item = i32> {
    active_subcarriers(format).iter().map(|s| s.index)
}

/// Data (non-pilot) subcarrier indices in ascending order.
pub fn data_indices(format: Format) -> &'static [i32] {
    match format {
        Format::Legacy => &LEGACY_DATA,
        Format::Ht => &HT_DATA,
    }
}

/// FFT bin holding subcarrier `k` (−32..=31 or −31..=32 both map).
#[inline]
pub const fn bin_of(k: i32) -> usize {
    k.rem_euclid(FFT_LEN as i32) as usize
}

/// Number of SIG symbols before the data (Legacy: L-SIG; HT: L-SIG + 2 HT-SIG).
pub fn signal_symbols(format: Format) -> usize {
    match format {
        Format::Legacy => 1,
        Format::Ht => 3,
    }
}

/// Sample offsets of every field of a packet, relative to the STF start.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FrameLayout {
    pub format: Format,
    pub gi: GuardInterval,
    pub nof_data: usize,
    /// Start of the first 64-sample L-LTF period (after its 32-sample GI).
    pub ltf1: usize,
    /// Symbol starts (including GI) of the SIG symbols.
    pub signal: Vec<usize>,
    /// Symbol start of the HT-LTF, when present.
    pub ht_ltf: Option<usize>,
    /// Symbol starts of the data symbols.
    pub data: Vec<usize>,
    /// Total packet length in samples.
    pub len: usize,
}

impl FrameLayout {
    pub fn new(format: Format, gi: GuardInterval, nof_data: usize) -> Self {
        let ltf1 = STF_LEN + 32;
        let mut pos = STF_LEN + LEGACY_LTF_LEN;
        let signal: Vec<usize> = (0..signal_symbols(format))
            .map(|i| pos + i * LONG_SYMBOL_LEN)
            .collect();
        pos += signal.len() * LONG_SYMBOL_LEN;
        let ht_ltf = match format {
            Format::Ht => {
                let p = pos;
                pos += HT_LTF_LEN;
                Some(p)
            }
            Format::Legacy => None,
        };
        let data: Vec<usize> = (0..nof_data).map(|i| pos + i * gi.symbol_len()).collect();
        pos += nof_data * gi.symbol_len();
        FrameLayout { format, gi, nof_data, ltf1, signal, ht_ltf, data, len: pos }
    }
}
