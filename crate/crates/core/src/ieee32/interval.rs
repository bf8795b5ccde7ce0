use std::fmt;

use super::{kernel, B32};
use crate::scalar::{DomainResult, IntervalDomain, RoundingMode, ScalarDomain};

use RoundingMode::{TowardNegInf as Down, TowardPosInf as Up};

/// Interval with binary32 endpoints, computed with directed rounding.
///
/// Endpoints are never NaN. The concretization is every binary32 value `v`
/// (infinities included) with `lo <= v <= hi`; an operation that could produce
/// NaN anywhere on its operand boxes returns `[-inf, +inf]`.
#[derive(Clone, Copy, PartialEq, Eq, Hash)]
pub struct B32Interval {
    lo: B32,
    hi: B32,
}

impl B32Interval {
    pub const ENTIRE: B32Interval = B32Interval {
        lo: B32::NEG_INFINITY,
        hi: B32::INFINITY,
    };

    /// Panics if either endpoint is NaN or `lo > hi`.
    pub fn new(lo: B32, hi: B32) -> Self {
        Self::try_new(lo, hi).expect("invalid B32Interval endpoints")
    }

    pub fn try_new(lo: B32, hi: B32) -> Option<Self> {
        if lo.is_nan() || hi.is_nan() || lo.to_f64() > hi.to_f64() {
            return None;
        }
        Some(B32Interval { lo, hi })
    }

    pub fn point(x: B32) -> Self {
        Self::new(x, x)
    }

    pub fn lo_b32(&self) -> B32 {
        self.lo
    }

    pub fn hi_b32(&self) -> B32 {
        self.hi
    }

    /// Does the interval contain the point `x` (NaN is never contained)?
    pub fn contains_b32(&self, x: B32) -> bool {
        !x.is_nan() && self.lo.to_f64() <= x.to_f64() && x.to_f64() <= self.hi.to_f64()
    }

    fn contains_zero(&self) -> bool {
        self.lo.to_f64() <= 0.0 && 0.0 <= self.hi.to_f64()
    }

    fn from_candidates(lo: B32, hi: B32) -> Self {
        if lo.is_nan() || hi.is_nan() {
            Self::ENTIRE
        } else {
            B32Interval { lo, hi }
        }
    }

    pub fn add(&self, rhs: &Self) -> Self {
        Self::from_candidates(
            kernel::add(self.lo, rhs.lo, Down),
            kernel::add(self.hi, rhs.hi, Up),
        )
    }

    pub fn sub(&self, rhs: &Self) -> Self {
        Self::from_candidates(
            kernel::sub(self.lo, rhs.hi, Down),
            kernel::sub(self.hi, rhs.lo, Up),
        )
    }

    fn corners(&self, rhs: &Self, f: fn(B32, B32, RoundingMode) -> B32) -> Self {
        let pairs = [
            (self.lo, rhs.lo),
            (self.lo, rhs.hi),
            (self.hi, rhs.lo),
            (self.hi, rhs.hi),
        ];
        let mut lo = B32::INFINITY;
        let mut hi = B32::NEG_INFINITY;
        for (a, b) in pairs {
            let d = f(a, b, Down);
            let u = f(a, b, Up);
            if d.is_nan() || u.is_nan() {
                return Self::ENTIRE;
            }
            lo = kernel::min(lo, d);
            hi = kernel::max(hi, u);
        }
        B32Interval { lo, hi }
    }

    pub fn mul(&self, rhs: &Self) -> Self {
        // 0 * inf at an endpoint is NaN; interior points can't produce NaN
        // without an endpoint doing so too
        self.corners(rhs, kernel::mul)
    }

    /// Widens to `[-inf, +inf]` whenever the divisor contains +0 or -0.
    pub fn div(&self, rhs: &Self) -> Self {
        if rhs.contains_zero() {
            return Self::ENTIRE;
        }
        self.corners(rhs, kernel::div)
    }

    pub fn sqrt(&self) -> Self {
        if self.lo.to_f64() < 0.0 {
            return Self::ENTIRE;
        }
        Self::from_candidates(kernel::sqrt(self.lo, Down), kernel::sqrt(self.hi, Up))
    }

    pub fn neg(&self) -> Self {
        B32Interval {
            lo: self.hi.negate_raw(),
            hi: self.lo.negate_raw(),
        }
    }

    pub fn abs(&self) -> Self {
        let (l, h) = (self.lo.to_f64(), self.hi.to_f64());
        if l >= 0.0 {
            *self
        } else if h <= 0.0 {
            self.neg()
        } else {
            let m = kernel::max(self.lo.negate_raw(), self.hi);
            B32Interval {
                lo: B32::ZERO,
                hi: m,
            }
        }
    }

    pub fn min(&self, rhs: &Self) -> Self {
        B32Interval {
            lo: kernel::min(self.lo, rhs.lo),
            hi: kernel::min(self.hi, rhs.hi),
        }
    }

    pub fn max(&self, rhs: &Self) -> Self {
        B32Interval {
            lo: kernel::max(self.lo, rhs.lo),
            hi: kernel::max(self.hi, rhs.hi),
        }
    }

    /// Monotone nondecreasing transcendental evaluated in binary64, with the
    /// endpoints pushed one binary64 ulp outward before directed rounding so the
    /// result also contains the delegated point evaluation.
    fn monotone(&self, f: fn(f64) -> f64, range: (f64, f64)) -> Self {
        let (l, h) = (self.lo.to_f64(), self.hi.to_f64());
        let lo_v = f(l);
        let hi_v = f(h);
        if lo_v.is_nan() || hi_v.is_nan() {
            return Self::ENTIRE;
        }
        // zero and the infinities map exactly
        let exact = |x: f64| x == 0.0 || x.is_infinite();
        let lo = if exact(l) {
            lo_v
        } else {
            lo_v.next_down().max(range.0)
        };
        let hi = if exact(h) {
            hi_v
        } else {
            hi_v.next_up().min(range.1)
        };
        B32Interval {
            lo: B32::from_real(lo, Down),
            hi: B32::from_real(hi, Up),
        }
    }

    pub fn exp(&self) -> Self {
        self.monotone(f64::exp, (0.0, f64::INFINITY))
    }

    pub fn tanh(&self) -> Self {
        self.monotone(f64::tanh, (-1.0, 1.0))
    }

    pub fn sigmoid(&self) -> Self {
        self.monotone(crate::scalar::sigmoid_f64, (0.0, 1.0))
    }

    /// Tight square: nonnegative, with the minimum at zero when straddling.
    pub fn sqr(&self) -> Self {
        let (l, h) = (self.lo.to_f64(), self.hi.to_f64());
        if l >= 0.0 {
            Self::from_candidates(
                kernel::mul(self.lo, self.lo, Down),
                kernel::mul(self.hi, self.hi, Up),
            )
        } else if h <= 0.0 {
            Self::from_candidates(
                kernel::mul(self.hi, self.hi, Down),
                kernel::mul(self.lo, self.lo, Up),
            )
        } else {
            let a = kernel::mul(self.lo, self.lo, Up);
            let b = kernel::mul(self.hi, self.hi, Up);
            Self::from_candidates(B32::ZERO, kernel::max(a, b))
        }
    }
}

impl fmt::Debug for B32Interval {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "[{:?}, {:?}]", self.lo, self.hi)
    }
}

impl ScalarDomain for B32Interval {
    const NAME: &'static str = "ieee32-interval";

    fn zero() -> Self {
        Self::point(B32::ZERO)
    }
    fn one() -> Self {
        Self::point(B32::ONE)
    }
    fn from_f64(x: f64) -> DomainResult<Self> {
        if x.is_nan() {
            return Ok(Self::ENTIRE);
        }
        Ok(<Self as IntervalDomain>::enclose(x, x))
    }
    fn add(&self, rhs: &Self) -> DomainResult<Self> {
        Ok(B32Interval::add(self, rhs))
    }
    fn sub(&self, rhs: &Self) -> DomainResult<Self> {
        Ok(B32Interval::sub(self, rhs))
    }
    fn mul(&self, rhs: &Self) -> DomainResult<Self> {
        Ok(B32Interval::mul(self, rhs))
    }
    fn div(&self, rhs: &Self) -> DomainResult<Self> {
        Ok(B32Interval::div(self, rhs))
    }
    fn neg(&self) -> Self {
        B32Interval::neg(self)
    }
    fn abs(&self) -> Self {
        B32Interval::abs(self)
    }
    fn min(&self, rhs: &Self) -> Self {
        B32Interval::min(self, rhs)
    }
    fn max(&self, rhs: &Self) -> Self {
        B32Interval::max(self, rhs)
    }
    fn exp(&self) -> DomainResult<Self> {
        Ok(B32Interval::exp(self))
    }
    fn tanh(&self) -> DomainResult<Self> {
        Ok(B32Interval::tanh(self))
    }
    fn sigmoid(&self) -> DomainResult<Self> {
        Ok(B32Interval::sigmoid(self))
    }
    fn sqrt(&self) -> DomainResult<Self> {
        Ok(B32Interval::sqrt(self))
    }
    fn sqr(&self) -> DomainResult<Self> {
        Ok(B32Interval::sqr(self))
    }
    fn lt(&self, rhs: &Self) -> bool {
        self.hi.ieee_lt(rhs.lo)
    }
    fn le(&self, rhs: &Self) -> bool {
        self.hi.ieee_le(rhs.lo)
    }
    fn approx(&self) -> f64 {
        let (l, h) = (self.lo.to_f64(), self.hi.to_f64());
        if l.is_infinite() || h.is_infinite() {
            if l == h {
                return l;
            }
            return if l.is_infinite() && h.is_infinite() {
                0.0
            } else if l.is_infinite() {
                h
            } else {
                l
            };
        }
        0.5 * l + 0.5 * h
    }
}

impl IntervalDomain for B32Interval {
    fn enclose(lo: f64, hi: f64) -> Self {
        if lo.is_nan() || hi.is_nan() {
            return Self::ENTIRE;
        }
        B32Interval {
            lo: B32::from_real(lo, Down),
            hi: B32::from_real(hi, Up),
        }
    }
    fn entire() -> Self {
        Self::ENTIRE
    }
    fn lo(&self) -> f64 {
        self.lo.to_f64()
    }
    fn hi(&self) -> f64 {
        self.hi.to_f64()
    }
}
