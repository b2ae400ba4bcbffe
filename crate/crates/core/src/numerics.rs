//! Fixed-point complex arithmetic and table-driven trigonometry.
//!
//! All sample values are Q1.15. Every narrowing step rounds half away from
//! zero and saturates to the destination word; nothing wraps silently.
//! Angles are [`PhaseWord`]s in units of 2π/4096.

use num_complex::Complex64;
use std::ops::{Add, AddAssign, Neg, Sub};

include!(concat!(env!("OUT_DIR"), "/tables.rs"));

/// Units per full circle for [`PhaseWord`].
pub const PHASE_CIRCLE: i32 = 4096;
/// Amplitude of the sine/cosine tables (value representing 1.0).
pub const TRIG_ONE: i32 = 1 << 14;

/// Complex time-domain sample, both components Q1.15.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default)]
pub struct IqSample {
    pub re: i16,
    pub im: i16,
}

impl IqSample {
    pub const ZERO: IqSample = IqSample { re: 0, im: 0 };

    pub const fn new(re: i16, im: i16) -> Self {
        IqSample { re, im }
    }

    /// Quantizes a real-valued pair; see [`quantize`].
    pub fn from_f64(re: f64, im: f64) -> Self {
        quantize(re, im)
    }

    pub fn from_complex(z: Complex64) -> Self {
        quantize(z.re, z.im)
    }

    pub fn to_complex(self) -> Complex64 {
        Complex64::new(self.re as f64 / 32768.0, self.im as f64 / 32768.0)
    }

    /// Squared magnitude in raw Q2.30 units.
    pub fn power(self) -> i64 {
        let (re, im) = (self.re as i64, self.im as i64);
        re * re + im * im
    }

    pub fn conj(self) -> Self {
        IqSample::new(self.re, self.im.saturating_neg())
    }

    pub fn saturating_neg(self) -> Self {
        IqSample::new(self.re.saturating_neg(), self.im.saturating_neg())
    }

    /// Multiplies by +1 or -1.
    pub fn signed(self, sign: i8) -> Self {
        if sign < 0 {
            self.saturating_neg()
        } else {
            self
        }
    }
}

/// Angle in units of 2π/4096, held in an 18-bit signed word.
///
/// Values beyond ±2048 are legal accumulations; they wrap modulo 4096 only
/// when used for a rotation.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, PartialOrd, Ord)]
pub struct PhaseWord(i32);

impl PhaseWord {
    pub const ZERO: PhaseWord = PhaseWord(0);
    pub const MAX: i32 = (1 << 17) - 1;
    pub const MIN: i32 = -(1 << 17);

    /// Builds a phase word, saturating to the 18-bit range.
    pub const fn new(units: i32) -> Self {
        let v = if units > Self::MAX {
            Self::MAX
        } else if units < Self::MIN {
            Self::MIN
        } else {
            units
        };
        PhaseWord(v)
    }

    pub const fn units(self) -> i32 {
        self.0
    }

    /// Position on the circle, 0..4096.
    pub const fn wrapped(self) -> u16 {
        self.0.rem_euclid(PHASE_CIRCLE) as u16
    }

    pub fn from_radians(rad: f64) -> Self {
        PhaseWord::new((rad * PHASE_CIRCLE as f64 / std::f64::consts::TAU).round() as i32)
    }

    pub fn to_radians(self) -> f64 {
        self.0 as f64 * std::f64::consts::TAU / PHASE_CIRCLE as f64
    }
}

impl Add for PhaseWord {
    type Output = PhaseWord;
    fn add(self, rhs: PhaseWord) -> PhaseWord {
        PhaseWord::new(self.0 + rhs.0)
    }
}

impl Sub for PhaseWord {
    type Output = PhaseWord;
    fn sub(self, rhs: PhaseWord) -> PhaseWord {
        PhaseWord::new(self.0 - rhs.0)
    }
}

impl Neg for PhaseWord {
    type Output = PhaseWord;
    fn neg(self) -> PhaseWord {
        PhaseWord::new(-self.0)
    }
}

/// Full-precision accumulator for sums of Q1.15 x Q1.15 products (Q.30).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default)]
pub struct WideAcc {
    pub re: i64,
    pub im: i64,
}

impl WideAcc {
    pub const ZERO: WideAcc = WideAcc { re: 0, im: 0 };

    pub const fn new(re: i64, im: i64) -> Self {
        WideAcc { re, im }
    }

    pub fn is_zero(self) -> bool {
        self.re == 0 && self.im == 0
    }

    /// Multiplies by +1 or -1.
    pub fn signed(self, sign: i8) -> Self {
        if sign < 0 {
            WideAcc::new(-self.re, -self.im)
        } else {
            self
        }
    }
}

impl From<IqSample> for WideAcc {
    fn from(s: IqSample) -> Self {
        WideAcc::new(s.re as i64, s.im as i64)
    }
}

impl Add for WideAcc {
    type Output = WideAcc;
    fn add(self, rhs: WideAcc) -> WideAcc {
        WideAcc::new(self.re + rhs.re, self.im + rhs.im)
    }
}

impl AddAssign for WideAcc {
    fn add_assign(&mut self, rhs: WideAcc) {
        self.re += rhs.re;
        self.im += rhs.im;
    }
}

/// Arithmetic right shift with round-half-away-from-zero.
#[inline]
pub fn round_shift(x: i64, shift: u32) -> i64 {
    if shift == 0 {
        return x;
    }
    // for x < 0: -((-x + h) >> s) == (x + h - 1) >> s
    let half = 1i64 << (shift - 1);
    (x + half - (x < 0) as i64) >> shift
}

/// Integer division rounding half away from zero. `d` must be non-zero.
#[inline]
pub fn div_round(n: i64, d: i64) -> i64 {
    debug_assert!(d != 0);
    // conditional negation via sign masks: (x ^ m) - m is -x when m = -1
    let md = d >> 63;
    let (n, d) = ((n ^ md) - md, (d ^ md) - md);
    let m = n >> 63;
    let q = (2 * ((n ^ m) - m) + d) / (2 * d);
    (q ^ m) - m
}

/// Saturates to the signed 16-bit range.
#[inline]
pub fn sat16(x: i64) -> i16 {
    x.clamp(i16::MIN as i64, i16::MAX as i64) as i16
}

/// Complex product rounded back to Q1.15.
#[inline]
pub fn cmul(a: IqSample, b: IqSample) -> IqSample {
    let (ar, ai, br, bi) = (a.re as i64, a.im as i64, b.re as i64, b.im as i64);
    IqSample::new(
        sat16(round_shift(ar * br - ai * bi, 15)),
        sat16(round_shift(ar * bi + ai * br, 15)),
    )
}

/// `conj(a) * b` at full precision.
#[inline]
pub fn conj_mul(a: IqSample, b: IqSample) -> WideAcc {
    let (ar, ai, br, bi) = (a.re as i64, a.im as i64, b.re as i64, b.im as i64);
    WideAcc::new(ar * br + ai * bi, ar * bi - ai * br)
}

/// Fractional bits of the arctangent table entries.
const ATAN_FRAC_BITS: u32 = 4;
/// Fractional bits of the interpolation position between table entries.
const ATAN_POS_BITS: u32 = 16;

// atan(num/den) for 0 <= num <= den, den > 0, in units of 2^-20 phase units.
fn octant_angle(num: u64, den: u64) -> i64 {
    // num·255·2^16 fits in u64 below 2^39
    let pos = if num < 1 << 39 {
        ((num * 255) << ATAN_POS_BITS) / den
    } else {
        ((((num as u128) * 255) << ATAN_POS_BITS) / den as u128) as u64
    };
    let idx = (pos >> ATAN_POS_BITS) as usize;
    let frac = (pos & ((1 << ATAN_POS_BITS) - 1)) as i64;
    let lo = ATAN_RATIO[idx] as i64;
    let hi = if idx < 255 { ATAN_RATIO[idx + 1] as i64 } else { lo };
    (lo << ATAN_POS_BITS) + (hi - lo) * frac
}

/// Quantized angle of `acc` in (-2048, 2048] phase units.
///
/// Folds the vector into the first octant, interpolates atan of the ratio
/// min/max between entries of a 256-point table on a 1/255 grid and
/// unfolds. Returns `None` for the zero vector, whose angle is undefined.
pub fn atan2_lut(acc: WideAcc) -> Option<PhaseWord> {
    if acc.is_zero() {
        return None;
    }
    const SHIFT: u32 = ATAN_FRAC_BITS + ATAN_POS_BITS;
    let quarter_turn = ((PHASE_CIRCLE / 4) as i64) << SHIFT;
    let ax = acc.re.unsigned_abs();
    let ay = acc.im.unsigned_abs();
    let mut a = if ay <= ax { octant_angle(ay, ax) } else { quarter_turn - octant_angle(ax, ay) };
    if acc.re < 0 {
        a = 2 * quarter_turn - a;
    }
    if acc.im < 0 {
        a = -a;
    }
    let mut a = round_shift(a, SHIFT) as i32;
    if a == -PHASE_CIRCLE / 2 {
        a = PHASE_CIRCLE / 2;
    }
    Some(PhaseWord::new(a))
}

const fn quarter(m: usize) -> i32 {
    if m == 1024 {
        TRIG_ONE
    } else {
        SIN_QUARTER[m] as i32
    }
}

const fn sin_cos_table() -> [[i16; 2]; PHASE_CIRCLE as usize] {
    let mut t = [[0; 2]; PHASE_CIRCLE as usize];
    let mut p = 0;
    while p < PHASE_CIRCLE as usize {
        let r = p & 1023;
        let (s, c) = match p >> 10 {
            0 => (quarter(r), quarter(1024 - r)),
            1 => (quarter(1024 - r), -quarter(r)),
            2 => (-quarter(r), -quarter(1024 - r)),
            _ => (-quarter(1024 - r), quarter(r)),
        };
        t[p] = [s as i16, c as i16];
        p += 1;
    }
    t
}

// Full circle unfolded from the quarter-wave table.
static SIN_COS: [[i16; 2]; PHASE_CIRCLE as usize] = sin_cos_table();

/// `(sin, cos)` of `phi` from the quarter-wave table, amplitude 2^14.
#[inline]
pub fn sin_cos(phi: PhaseWord) -> (i32, i32) {
    let [s, c] = SIN_COS[phi.wrapped() as usize];
    (s as i32, c as i32)
}

/// `s * e^{j phi}` rounded to Q1.15.
#[inline]
pub fn rotate(s: IqSample, phi: PhaseWord) -> IqSample {
    let (sn, c) = sin_cos(phi);
    let (re, im) = (s.re as i32, s.im as i32);
    // |products| <= 2^29, sums stay inside i32
    let r = |x: i32| ((x + (1 << 13) - (x < 0) as i32) >> 14).clamp(i16::MIN as i32, i16::MAX as i32) as i16;
    IqSample::new(r(re * c - im * sn), r(re * sn + im * c))
}

/// Rounds a real pair to Q1.15, half away from zero, clamped to range.
pub fn quantize(re: f64, im: f64) -> IqSample {
    fn q(x: f64) -> i16 {
        (x * 32768.0).round().clamp(-32768.0, 32767.0) as i16
    }
    IqSample::new(q(re), q(im))
}
