//! Software IEEE-754 binary32: a bit-level kernel and directed-rounded
//! endpoint intervals built on it.
//!
//! The kernel never touches host floating-point arithmetic; host floats only
//! appear at the transcendental trust boundary ([`B32::exp`] and friends), which
//! compute in binary64 and round back with [`B32::from_real`].
//!
//! All invalid operations and NaN inputs produce the canonical quiet NaN
//! `0x7FC00000`. `min`/`max` propagate NaN.

mod interval;
mod kernel;

use std::fmt;
use std::str::FromStr;

use thiserror::Error;

pub use interval::B32Interval;

use crate::error::DomainError;
use crate::scalar::{DomainResult, RoundingMode, ScalarDomain};

/// A binary32 bit pattern.
#[derive(Clone, Copy, PartialEq, Eq, Hash)]
pub struct B32(u32);

/// IEEE classification of a bit pattern.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum B32Class {
    Zero,
    Subnormal,
    Normal,
    Infinite,
    Nan,
}

/// Binary operations of the kernel. Unary ones ignore the second operand.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum B32Op {
    Add,
    Sub,
    Mul,
    Div,
    Sqrt,
    Min,
    Max,
    Neg,
    Abs,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Error)]
#[error("NaN has no real value")]
pub struct NanSignal;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("invalid binary32 literal {0:?}")]
pub struct ParseB32Error(pub String);

impl B32 {
    pub const ZERO: B32 = B32(0);
    pub const NEG_ZERO: B32 = B32(0x8000_0000);
    pub const ONE: B32 = B32(0x3F80_0000);
    pub const INFINITY: B32 = B32(0x7F80_0000);
    pub const NEG_INFINITY: B32 = B32(0xFF80_0000);
    pub const MAX: B32 = B32(0x7F7F_FFFF);
    pub const MIN_SUBNORMAL: B32 = B32(1);
    /// The canonical quiet NaN.
    pub const NAN: B32 = B32(0x7FC0_0000);

    pub const fn from_bits(bits: u32) -> Self {
        B32(bits)
    }

    pub const fn bits(self) -> u32 {
        self.0
    }

    pub fn sign(self) -> u32 {
        self.0 >> 31
    }

    pub fn biased_exponent(self) -> u32 {
        (self.0 >> 23) & 0xFF
    }

    pub fn significand(self) -> u32 {
        self.0 & 0x7F_FFFF
    }

    pub fn class(self) -> B32Class {
        match (self.biased_exponent(), self.significand()) {
            (0, 0) => B32Class::Zero,
            (0, _) => B32Class::Subnormal,
            (0xFF, 0) => B32Class::Infinite,
            (0xFF, _) => B32Class::Nan,
            _ => B32Class::Normal,
        }
    }

    pub fn is_nan(self) -> bool {
        self.class() == B32Class::Nan
    }

    pub fn is_infinite(self) -> bool {
        self.class() == B32Class::Infinite
    }

    pub fn is_finite(self) -> bool {
        !matches!(self.class(), B32Class::Infinite | B32Class::Nan)
    }

    pub fn is_zero(self) -> bool {
        self.class() == B32Class::Zero
    }

    pub fn is_sign_negative(self) -> bool {
        self.sign() == 1
    }

    pub(crate) fn negate_raw(self) -> Self {
        B32(self.0 ^ 0x8000_0000)
    }

    /// Rounds an extended real (binary64 carrier, infinities allowed) to binary32.
    ///
    /// Panics on NaN input; NaN is not a real.
    pub fn from_real(x: f64, mode: RoundingMode) -> Self {
        assert!(!x.is_nan(), "from_real: NaN is not an extended real");
        kernel::from_f64(x, mode).0
    }

    /// Like [`B32::from_real`] but also reports whether rounding was inexact.
    pub fn from_real_exact(x: f64, mode: RoundingMode) -> (Self, bool) {
        assert!(!x.is_nan(), "from_real: NaN is not an extended real");
        kernel::from_f64(x, mode)
    }

    /// Exact extended-real value of a non-NaN pattern.
    pub fn to_real(self) -> Result<f64, NanSignal> {
        if self.is_nan() {
            Err(NanSignal)
        } else {
            Ok(kernel::to_f64(self))
        }
    }

    /// Exact binary64 value; NaN maps to binary64 NaN.
    pub fn to_f64(self) -> f64 {
        kernel::to_f64(self)
    }

    pub fn op(op: B32Op, a: B32, b: B32, mode: RoundingMode) -> B32 {
        match op {
            B32Op::Add => kernel::add(a, b, mode),
            B32Op::Sub => kernel::sub(a, b, mode),
            B32Op::Mul => kernel::mul(a, b, mode),
            B32Op::Div => kernel::div(a, b, mode),
            B32Op::Sqrt => kernel::sqrt(a, mode),
            B32Op::Min => kernel::min(a, b),
            B32Op::Max => kernel::max(a, b),
            B32Op::Neg => {
                if a.is_nan() {
                    B32::NAN
                } else {
                    a.negate_raw()
                }
            }
            B32Op::Abs => {
                if a.is_nan() {
                    B32::NAN
                } else {
                    B32(a.0 & 0x7FFF_FFFF)
                }
            }
        }
    }

    pub fn add_rm(self, rhs: B32, mode: RoundingMode) -> B32 {
        kernel::add(self, rhs, mode)
    }

    pub fn sub_rm(self, rhs: B32, mode: RoundingMode) -> B32 {
        kernel::sub(self, rhs, mode)
    }

    pub fn mul_rm(self, rhs: B32, mode: RoundingMode) -> B32 {
        kernel::mul(self, rhs, mode)
    }

    pub fn div_rm(self, rhs: B32, mode: RoundingMode) -> B32 {
        kernel::div(self, rhs, mode)
    }

    pub fn sqrt_rm(self, mode: RoundingMode) -> B32 {
        kernel::sqrt(self, mode)
    }

    fn transcendental(self, f: impl Fn(f64) -> f64) -> B32 {
        if self.is_nan() {
            return B32::NAN;
        }
        let y = f(self.to_f64());
        if y.is_nan() {
            return B32::NAN;
        }
        B32::from_real(y, RoundingMode::NearestEven)
    }

    /// `exp` evaluated in binary64 and rounded to nearest binary32.
    /// Not correctly rounded.
    pub fn exp_delegated(self) -> B32 {
        self.transcendental(f64::exp)
    }

    pub fn tanh_delegated(self) -> B32 {
        self.transcendental(f64::tanh)
    }

    pub fn sigmoid_delegated(self) -> B32 {
        self.transcendental(crate::scalar::sigmoid_f64)
    }

    /// IEEE `compareQuietLess`: false on NaN, `-0 == +0`.
    pub fn ieee_lt(self, rhs: B32) -> bool {
        if self.is_nan() || rhs.is_nan() {
            return false;
        }
        self.to_f64() < rhs.to_f64()
    }

    pub fn ieee_le(self, rhs: B32) -> bool {
        if self.is_nan() || rhs.is_nan() {
            return false;
        }
        self.to_f64() <= rhs.to_f64()
    }

    /// `0x%08X` form used by every file format.
    pub fn to_hex(self) -> String {
        format!("0x{:08X}", self.0)
    }

    /// Shortest decimal that reads back to the same pattern.
    pub fn to_decimal(self) -> String {
        match self.class() {
            B32Class::Nan => "nan".to_string(),
            B32Class::Infinite if self.is_sign_negative() => "-inf".to_string(),
            B32Class::Infinite => "inf".to_string(),
            _ => format!("{:?}", f32::from_bits(self.0)),
        }
    }

    /// Parses `0x????????` exactly, or a decimal rounded to nearest.
    pub fn parse_literal(s: &str) -> Result<Self, ParseB32Error> {
        let t = s.trim();
        if let Some(hex) = t.strip_prefix("0x").or_else(|| t.strip_prefix("0X")) {
            if hex.is_empty() || hex.len() > 8 {
                return Err(ParseB32Error(s.to_string()));
            }
            return u32::from_str_radix(hex, 16)
                .map(B32)
                .map_err(|_| ParseB32Error(s.to_string()));
        }
        let x: f64 = t.parse().map_err(|_| ParseB32Error(s.to_string()))?;
        if x.is_nan() {
            return Ok(B32::NAN);
        }
        Ok(B32::from_real(x, RoundingMode::NearestEven))
    }
}

impl fmt::Debug for B32 {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} ({})", self.to_hex(), self.to_decimal())
    }
}

impl fmt::Display for B32 {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.to_hex())
    }
}

impl FromStr for B32 {
    type Err = ParseB32Error;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        B32::parse_literal(s)
    }
}

/// Point evaluation in round-to-nearest-even. Never fails: exceptional
/// results are infinities or the canonical NaN.
impl ScalarDomain for B32 {
    const NAME: &'static str = "ieee32";

    fn zero() -> Self {
        B32::ZERO
    }
    fn one() -> Self {
        B32::ONE
    }
    fn from_f64(x: f64) -> DomainResult<Self> {
        if x.is_nan() {
            return Ok(B32::NAN);
        }
        Ok(B32::from_real(x, RoundingMode::NearestEven))
    }
    fn from_literal(s: &str) -> DomainResult<Self> {
        B32::parse_literal(s).map_err(|_| DomainError::Invalid("unparsable binary32 literal"))
    }
    fn add(&self, rhs: &Self) -> DomainResult<Self> {
        Ok(kernel::add(*self, *rhs, RoundingMode::NearestEven))
    }
    fn sub(&self, rhs: &Self) -> DomainResult<Self> {
        Ok(kernel::sub(*self, *rhs, RoundingMode::NearestEven))
    }
    fn mul(&self, rhs: &Self) -> DomainResult<Self> {
        Ok(kernel::mul(*self, *rhs, RoundingMode::NearestEven))
    }
    fn div(&self, rhs: &Self) -> DomainResult<Self> {
        Ok(kernel::div(*self, *rhs, RoundingMode::NearestEven))
    }
    fn neg(&self) -> Self {
        B32::op(B32Op::Neg, *self, *self, RoundingMode::NearestEven)
    }
    fn abs(&self) -> Self {
        B32::op(B32Op::Abs, *self, *self, RoundingMode::NearestEven)
    }
    fn min(&self, rhs: &Self) -> Self {
        kernel::min(*self, *rhs)
    }
    fn max(&self, rhs: &Self) -> Self {
        kernel::max(*self, *rhs)
    }
    fn exp(&self) -> DomainResult<Self> {
        Ok(self.exp_delegated())
    }
    fn tanh(&self) -> DomainResult<Self> {
        Ok(self.tanh_delegated())
    }
    fn sigmoid(&self) -> DomainResult<Self> {
        Ok(self.sigmoid_delegated())
    }
    fn sqrt(&self) -> DomainResult<Self> {
        Ok(kernel::sqrt(*self, RoundingMode::NearestEven))
    }
    fn lt(&self, rhs: &Self) -> bool {
        self.ieee_lt(*rhs)
    }
    fn le(&self, rhs: &Self) -> bool {
        self.ieee_le(*rhs)
    }
    fn approx(&self) -> f64 {
        self.to_f64()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use RoundingMode::*;

    #[test]
    fn classification() {
        assert_eq!(B32::ZERO.class(), B32Class::Zero);
        assert_eq!(B32::NEG_ZERO.class(), B32Class::Zero);
        assert_eq!(B32::from_bits(1).class(), B32Class::Subnormal);
        assert_eq!(B32::from_bits(0x007F_FFFF).class(), B32Class::Subnormal);
        assert_eq!(B32::from_bits(0x0080_0000).class(), B32Class::Normal);
        assert_eq!(B32::INFINITY.class(), B32Class::Infinite);
        assert_eq!(B32::from_bits(0x7F80_0001).class(), B32Class::Nan);
    }

    #[test]
    fn from_real_examples() {
        assert_eq!(
            B32::from_real(1.0 + 2f64.powi(-24), TowardPosInf).bits(),
            0x3F80_0001
        );
        assert_eq!(B32::from_real(0.0, NearestEven).bits(), 0);
        assert_eq!(B32::from_bits(1).to_real().unwrap(), 2f64.powi(-149));
        assert_eq!(
            B32::from_bits(1).to_real().unwrap(),
            f32::from_bits(1) as f64
        );
        assert_eq!(B32::NAN.to_real(), Err(NanSignal));
        assert_eq!(B32::NEG_INFINITY.to_real().unwrap(), f64::NEG_INFINITY);
    }

    #[test]
    fn spec_op_examples() {
        let one = B32::from_bits(0x3F80_0000);
        let tiny = B32::from_bits(0x3380_0000);
        assert_eq!(
            B32::op(B32Op::Add, one, tiny, NearestEven).bits(),
            0x3F80_0000
        );
        assert_eq!(
            B32::op(B32Op::Add, B32::ZERO, B32::NEG_ZERO, NearestEven).bits(),
            0
        );
        for mode in [NearestEven, TowardNegInf, TowardPosInf] {
            let r = B32::op(B32Op::Add, B32::INFINITY, B32::NEG_INFINITY, mode);
            assert_eq!(r.bits(), 0x7FC0_0000);
        }
    }

    #[test]
    fn nan_policy() {
        let payload = B32::from_bits(0x7F80_1234);
        assert_eq!(
            B32::op(B32Op::Add, payload, B32::ONE, NearestEven),
            B32::NAN
        );
        assert_eq!(B32::op(B32Op::Neg, payload, payload, NearestEven), B32::NAN);
        assert_eq!(
            B32::op(B32Op::Min, B32::ONE, payload, NearestEven),
            B32::NAN
        );
        assert_eq!(
            B32::op(B32Op::Max, payload, B32::ONE, NearestEven),
            B32::NAN
        );
    }

    #[test]
    fn min_max_signed_zero() {
        assert_eq!(
            B32::op(B32Op::Min, B32::ZERO, B32::NEG_ZERO, NearestEven),
            B32::NEG_ZERO
        );
        assert_eq!(
            B32::op(B32Op::Max, B32::NEG_ZERO, B32::ZERO, NearestEven),
            B32::ZERO
        );
    }

    #[test]
    fn transcendentals() {
        assert_eq!(B32::ZERO.tanh_delegated(), B32::ZERO);
        assert_eq!(B32::INFINITY.exp_delegated(), B32::INFINITY);
        let half = B32::from_real(0.5, NearestEven);
        assert_eq!(
            half.tanh_delegated().bits(),
            (0.5f64.tanh() as f32).to_bits()
        );
        assert!(B32::NAN.exp_delegated().is_nan());
    }

    #[test]
    fn literals() {
        assert_eq!("0x3F800000".parse::<B32>().unwrap(), B32::ONE);
        assert_eq!("1.0".parse::<B32>().unwrap(), B32::ONE);
        assert_eq!(B32::ONE.to_hex(), "0x3F800000");
        assert_eq!(B32::ONE.to_decimal(), "1.0");
        assert!("0xZZ".parse::<B32>().is_err());
        assert!("0x123456789".parse::<B32>().is_err());
        let v = B32::from_real(0.1, NearestEven);
        assert_eq!(v.to_decimal().parse::<B32>().unwrap(), v);
    }
}
