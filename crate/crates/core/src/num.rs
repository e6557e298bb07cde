//! Session precision and the big-float helpers shared by every module.
//!
//! All arithmetic in one computation uses a single [`Precision`]. Values are
//! plain MPFR floats ([`BigReal`]); the helpers here only fix how they are
//! created, compared and serialized.

use rug::float::Constant;
use rug::ops::Pow;
use rug::{Float, Integer};
use serde::{Deserialize, Serialize};

use crate::error::{precondition, Error, Result};

/// Arbitrary-precision binary floating point number.
pub type BigReal = Float;

/// Headroom (bits) kept between the largest magnitude in play and the
/// finest absolute resolution a computation has to distinguish.
const RANGE_GUARD_BITS: i64 = 16;

/// Mantissa width shared by every value of one computation session.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Precision(u32);

impl Precision {
    pub const MIN_BITS: u32 = 64;
    pub const DEFAULT: Precision = Precision(512);

    pub fn new(bits: u32) -> Result<Self> {
        if bits < Self::MIN_BITS {
            return Err(precondition(format!(
                "precision must be at least {} bits, got {bits}",
                Self::MIN_BITS
            )));
        }
        Ok(Precision(bits))
    }

    /// Precision that resolves every generator of an alphabet truncated at
    /// `j_max`: positions reach `2^(j_max^2)` while radii shrink to
    /// `2^(-j_max-2)`. Never below the 512-bit default.
    pub fn for_alphabet(j_max: i32) -> Self {
        let j = i64::from(j_max.unsigned_abs());
        let needed = j * j + j + 256;
        let rounded = ((needed + 63) / 64) * 64;
        Precision(rounded.max(i64::from(Self::DEFAULT.0)) as u32)
    }

    pub fn bits(self) -> u32 {
        self.0
    }

    /// Equality tolerance `2^(-bits/2 + 16)`.
    pub fn tolerance(self) -> BigReal {
        self.pow2(-(i64::from(self.0) / 2) + 16)
    }

    /// Relative floor `2^(-bits + 8)` below which a quantity is considered
    /// lost to rounding.
    pub fn exhaustion_floor(self) -> BigReal {
        self.pow2(-i64::from(self.0) + 8)
    }

    /// Checks that magnitudes up to `2^magnitude_exp` can be resolved to an
    /// absolute accuracy of `2^resolution_exp` in this session.
    pub fn check_range(self, magnitude_exp: i64, resolution_exp: i64) -> Result<()> {
        if magnitude_exp - resolution_exp + RANGE_GUARD_BITS > i64::from(self.0) {
            return Err(Error::ExponentOverflow {
                exponent: magnitude_exp,
                precision: self.0,
            });
        }
        Ok(())
    }

    pub fn zero(self) -> BigReal {
        Float::new(self.0)
    }

    pub fn one(self) -> BigReal {
        Float::with_val(self.0, 1)
    }

    pub fn int(self, v: i64) -> BigReal {
        Float::with_val(self.0, v)
    }

    pub fn float(self, v: f64) -> BigReal {
        Float::with_val(self.0, v)
    }

    /// Exact `2^e`.
    pub fn pow2(self, e: i64) -> BigReal {
        let e = i32::try_from(e).expect("binary exponent within i32");
        Float::with_val(self.0, Float::i_exp(1, e))
    }

    pub fn pi(self) -> BigReal {
        Float::with_val(self.0, Constant::Pi)
    }

    pub fn ln2(self) -> BigReal {
        Float::with_val(self.0, Constant::Log2)
    }

    /// Rounds `x` into this session.
    pub fn of(self, x: &BigReal) -> BigReal {
        Float::with_val(self.0, x)
    }

    pub fn parse(self, s: &str) -> Result<BigReal> {
        let trimmed = s.trim();
        if let Some((m, e)) = trimmed.split_once("*2^") {
            let mantissa: Integer = m
                .parse()
                .map_err(|_| precondition(format!("bad binary mantissa in {s:?}")))?;
            let exp: i32 = e
                .parse()
                .map_err(|_| precondition(format!("bad binary exponent in {s:?}")))?;
            let mut v = Float::with_val(self.0, mantissa);
            v <<= exp;
            return Ok(v);
        }
        match trimmed {
            "inf" | "+inf" => return Ok(Float::with_val(self.0, rug::float::Special::Infinity)),
            "-inf" => return Ok(Float::with_val(self.0, rug::float::Special::NegInfinity)),
            _ => {}
        }
        let parsed =
            Float::parse(trimmed).map_err(|e| precondition(format!("bad number {s:?}: {e}")))?;
        Ok(Float::with_val(self.0, parsed))
    }
}

impl Default for Precision {
    fn default() -> Self {
        Self::DEFAULT
    }
}

impl std::fmt::Display for Precision {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{} bits", self.0)
    }
}

/// `|a - b| <= tol`.
pub fn approx_eq(a: &BigReal, b: &BigReal, tol: &BigReal) -> bool {
    let diff = Float::with_val(a.prec().max(b.prec()), a - b).abs();
    diff <= *tol
}

/// `|a - b| <= tol * max(1, |a|, |b|)`.
pub fn approx_eq_scaled(a: &BigReal, b: &BigReal, tol: &BigReal) -> bool {
    let prec = a.prec().max(b.prec());
    let diff = Float::with_val(prec, a - b).abs();
    let mut scale = Float::with_val(prec, a.abs_ref());
    let bb = Float::with_val(prec, b.abs_ref());
    if bb > scale {
        scale = bb;
    }
    if scale < 1 {
        scale = Float::with_val(prec, 1);
    }
    diff <= Float::with_val(prec, tol * &scale)
}

/// `base^exponent` for positive `base`, evaluated as `exp(exponent * ln base)`.
pub fn powf(base: &BigReal, exponent: &BigReal) -> BigReal {
    let prec = base.prec();
    if exponent.is_zero() {
        return Float::with_val(prec, 1);
    }
    let ln = Float::with_val(prec, base.ln_ref());
    Float::with_val(prec, &ln * exponent).exp()
}

/// `base^(1/n)` for positive `base`.
pub fn nth_root(base: &BigReal, n: u32) -> BigReal {
    Float::with_val(base.prec(), base.root_ref(n))
}

/// Natural log of `2^e`.
pub fn ln_pow2(prec: Precision, e: i64) -> BigReal {
    Float::with_val(prec.bits(), prec.ln2() * e)
}

/// Decimal and exact binary renderings of a big float. The binary form
/// `m*2^e` (odd integer mantissa) round-trips without loss.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct BigNum {
    pub decimal: String,
    pub binary: String,
}

impl BigNum {
    pub const DECIMAL_DIGITS: usize = 40;

    pub fn new(x: &BigReal) -> Self {
        BigNum {
            decimal: decimal_string(x, Self::DECIMAL_DIGITS),
            binary: binary_string(x),
        }
    }

    pub fn to_big(&self, prec: Precision) -> Result<BigReal> {
        prec.parse(&self.binary)
    }
}

impl From<&BigReal> for BigNum {
    fn from(x: &BigReal) -> Self {
        BigNum::new(x)
    }
}

pub fn decimal_string(x: &BigReal, digits: usize) -> String {
    if x.is_infinite() {
        return if x.is_sign_negative() { "-inf" } else { "inf" }.to_string();
    }
    if x.is_zero() {
        return "0".to_string();
    }
    x.to_string_radix(10, Some(digits))
}

pub fn binary_string(x: &BigReal) -> String {
    if x.is_infinite() {
        return if x.is_sign_negative() { "-inf" } else { "inf" }.to_string();
    }
    match x.to_integer_exp() {
        None => "nan".to_string(),
        Some((m, _)) if m == 0 => "0".to_string(),
        Some((mut m, mut e)) => {
            let tz = m.find_one(0).unwrap_or(0);
            m >>= tz;
            e += tz as i32;
            if e == 0 {
                m.to_string()
            } else {
                format!("{m}*2^{e}")
            }
        }
    }
}

/// `log2 |x|` as an f64, exact enough for reporting radii far outside the
/// double exponent range.
pub fn log2_f64(x: &BigReal) -> f64 {
    if x.is_zero() {
        return f64::NEG_INFINITY;
    }
    let (mant, exp) = x.to_f64_exp();
    mant.abs().log2() + f64::from(exp)
}

/// Rounds an integer power into the session: `base^e`.
pub fn powi(base: &BigReal, e: i32) -> BigReal {
    Float::with_val(base.prec(), base.pow(e))
}
