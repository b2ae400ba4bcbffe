//! Gray-coded 802.11 constellations with unit average power.

use num_complex::Complex64;
use std::fmt;

use crate::frame::Format;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Modulation {
    Bpsk,
    Qpsk,
    Qam16,
    Qam64,
}

impl Modulation {
    pub const ALL: [Modulation; 4] = [Modulation::Bpsk, Modulation::Qpsk, Modulation::Qam16, Modulation::Qam64];

    /// Modulation of MCS `mcs` (0–7) for the given format.
    pub fn for_mcs(format: Format, mcs: u8) -> Option<Modulation> {
        use Modulation::*;
        let table = match format {
            // 6, 9, 12, 18, 24, 36, 48, 54 Mb/s
            Format::Legacy => [Bpsk, Bpsk, Qpsk, Qpsk, Qam16, Qam16, Qam64, Qam64],
            Format::Ht => [Bpsk, Qpsk, Qpsk, Qam16, Qam16, Qam64, Qam64, Qam64],
        };
        table.get(mcs as usize).copied()
    }

    pub fn bits_per_symbol(self) -> u32 {
        match self {
            Modulation::Bpsk => 1,
            Modulation::Qpsk => 2,
            Modulation::Qam16 => 4,
            Modulation::Qam64 => 6,
        }
    }

    pub fn order(self) -> usize {
        1 << self.bits_per_symbol()
    }

    fn bits_per_axis(self) -> u32 {
        match self {
            Modulation::Bpsk => 1,
            _ => self.bits_per_symbol() / 2,
        }
    }

    fn norm(self) -> f64 {
        match self {
            Modulation::Bpsk => 1.0,
            Modulation::Qpsk => 1.0 / 2f64.sqrt(),
            Modulation::Qam16 => 1.0 / 10f64.sqrt(),
            Modulation::Qam64 => 1.0 / 42f64.sqrt(),
        }
    }

    /// Unnormalized axis level (odd integer) for a Gray-coded bit group.
    fn level(self, bits: u32) -> i32 {
        let n = self.bits_per_axis();
        // Gray decode gives the position among the 2^n levels, left to right.
        let mut pos = bits;
        let mut shift = 1;
        while shift < n {
            pos ^= pos >> shift;
            shift <<= 1;
        }
        2 * pos as i32 - ((1 << n) - 1)
    }

    fn bits_of_level(self, pos: u32) -> u32 {
        pos ^ (pos >> 1)
    }

    /// Constellation point for symbol index `sym` (< order).
    pub fn point(self, sym: usize) -> Complex64 {
        let sym = sym as u32;
        match self {
            Modulation::Bpsk => Complex64::new(self.level(sym & 1) as f64, 0.0),
            _ => {
                let n = self.bits_per_axis();
                let i_bits = sym >> n;
                let q_bits = sym & ((1 << n) - 1);
                Complex64::new(self.level(i_bits) as f64, self.level(q_bits) as f64) * self.norm()
            }
        }
    }

    fn decide_axis(self, x: f64) -> u32 {
        let n = self.bits_per_axis();
        let levels = 1i32 << n;
        let pos = ((x / self.norm() + (levels - 1) as f64) / 2.0).round();
        let pos = pos.clamp(0.0, (levels - 1) as f64) as u32;
        self.bits_of_level(pos)
    }

    /// Hard decision: index of the nearest constellation point.
    pub fn decide(self, z: Complex64) -> usize {
        match self {
            Modulation::Bpsk => self.decide_axis(z.re) as usize,
            _ => ((self.decide_axis(z.re) << self.bits_per_axis()) | self.decide_axis(z.im)) as usize,
        }
    }
}

impl fmt::Display for Modulation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Modulation::Bpsk => "bpsk",
            Modulation::Qpsk => "qpsk",
            Modulation::Qam16 => "16qam",
            Modulation::Qam64 => "64qam",
        })
    }
}
