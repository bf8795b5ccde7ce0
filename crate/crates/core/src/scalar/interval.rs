use std::fmt;

use num_traits::Float;

use super::real::sigmoid;
use super::{DomainResult, IntervalDomain, RealScalar, ScalarDomain};
use crate::error::DomainError;

/// Closed real interval with outward-rounded endpoints in `F`.
///
/// Each endpoint operation is done in `F`; if the rounded result is inexact it
/// is moved one ulp outward. Exactness of `+ - * / sqrt` is detected with
/// error-free transformations, so exact cases stay tight. Transcendentals are
/// always widened by one ulp.
#[derive(Clone, Copy, PartialEq)]
pub struct Interval<F: RealScalar> {
    lo: F,
    hi: F,
}

/// Below this magnitude an FMA residual may underflow, so exactness is not
/// trusted and the result is widened unconditionally.
fn tiny<F: RealScalar>() -> F {
    F::min_positive_value() * F::of_f64(2f64.powi(60))
}

/// Rounding direction of a computed result relative to the exact one:
/// `Some(sign)` where sign > 0 means exact > computed, `None` if unknown.
fn residual_sign<F: RealScalar>(r: F) -> Option<F> {
    if r.is_nan() {
        None
    } else {
        Some(r)
    }
}

fn down<F: RealScalar>(x: F, residual: Option<F>) -> F {
    match residual {
        Some(r) if r >= F::zero() => x,
        _ => x.next_down(),
    }
}

fn up<F: RealScalar>(x: F, residual: Option<F>) -> F {
    match residual {
        Some(r) if r <= F::zero() => x,
        _ => x.next_up(),
    }
}

fn two_sum_err<F: RealScalar>(a: F, b: F, s: F) -> Option<F> {
    if !s.is_finite() {
        return if a.is_infinite() || b.is_infinite() {
            Some(F::zero())
        } else {
            None
        };
    }
    let bv = s - a;
    let av = s - bv;
    residual_sign((a - av) + (b - bv))
}

fn mul_err<F: RealScalar>(a: F, b: F, p: F) -> Option<F> {
    if a.is_zero() || b.is_zero() || a.is_infinite() || b.is_infinite() {
        return Some(F::zero());
    }
    if !p.is_finite() || p.abs() < tiny::<F>() {
        return None;
    }
    residual_sign(a.mul_add(b, -p))
}

fn add_lo<F: RealScalar>(a: F, b: F) -> F {
    let s = a + b;
    down(s, two_sum_err(a, b, s))
}

fn add_hi<F: RealScalar>(a: F, b: F) -> F {
    let s = a + b;
    up(s, two_sum_err(a, b, s))
}

fn mul_dir<F: RealScalar>(a: F, b: F) -> (F, F) {
    // 0 * inf is 0 for real intervals: an infinite endpoint is an unbounded
    // marker, not a value
    if a.is_zero() || b.is_zero() {
        return (F::zero(), F::zero());
    }
    let p = a * b;
    let e = mul_err(a, b, p);
    (down(p, e), up(p, e))
}

fn div_dir<F: RealScalar>(a: F, b: F) -> (F, F) {
    if a.is_zero() {
        return (F::zero(), F::zero());
    }
    if b.is_infinite() {
        if a.is_infinite() {
            return (F::neg_infinity(), F::infinity());
        }
        return (F::zero(), F::zero());
    }
    let q = a / b;
    if a.is_infinite() {
        return (q, q);
    }
    if !q.is_finite() || q.abs() < tiny::<F>() || a.abs() < tiny::<F>() {
        return (q.next_down(), q.next_up());
    }
    // a - q*b has the sign of (a/b - q) * b
    let r = (-q).mul_add(b, a);
    let e = residual_sign(if b > F::zero() { r } else { -r });
    (down(q, e), up(q, e))
}

impl<F: RealScalar> Interval<F> {
    /// Panics on NaN endpoints or `lo > hi`.
    pub fn new(lo: F, hi: F) -> Self {
        assert!(!(lo.is_nan() || hi.is_nan()), "NaN interval endpoint");
        assert!(lo <= hi, "interval lower endpoint above upper");
        Interval { lo, hi }
    }

    pub fn try_new(lo: F, hi: F) -> Option<Self> {
        (!lo.is_nan() && !hi.is_nan() && lo <= hi).then_some(Interval { lo, hi })
    }

    pub fn point(x: F) -> Self {
        Self::new(x, x)
    }

    pub fn entire() -> Self {
        Interval {
            lo: F::neg_infinity(),
            hi: F::infinity(),
        }
    }

    pub fn lower(&self) -> F {
        self.lo
    }

    pub fn upper(&self) -> F {
        self.hi
    }

    fn contains_zero(&self) -> bool {
        self.lo <= F::zero() && F::zero() <= self.hi
    }

    fn from_products(cands: [(F, F); 4]) -> Self {
        let lo = cands.iter().map(|c| c.0).fold(F::infinity(), Float::min);
        let hi = cands
            .iter()
            .map(|c| c.1)
            .fold(F::neg_infinity(), Float::max);
        Interval { lo, hi }
    }

    pub fn add(&self, rhs: &Self) -> Self {
        let lo = add_lo(self.lo, rhs.lo);
        let hi = add_hi(self.hi, rhs.hi);
        if lo.is_nan() || hi.is_nan() {
            return Self::entire();
        }
        Interval { lo, hi }
    }

    pub fn neg(&self) -> Self {
        Interval {
            lo: -self.hi,
            hi: -self.lo,
        }
    }

    pub fn sub(&self, rhs: &Self) -> Self {
        self.add(&rhs.neg())
    }

    pub fn mul(&self, rhs: &Self) -> Self {
        Self::from_products([
            mul_dir(self.lo, rhs.lo),
            mul_dir(self.lo, rhs.hi),
            mul_dir(self.hi, rhs.lo),
            mul_dir(self.hi, rhs.hi),
        ])
    }

    /// Division through zero returns the entire line.
    pub fn div(&self, rhs: &Self) -> Self {
        if rhs.contains_zero() {
            return Self::entire();
        }
        Self::from_products([
            div_dir(self.lo, rhs.lo),
            div_dir(self.lo, rhs.hi),
            div_dir(self.hi, rhs.lo),
            div_dir(self.hi, rhs.hi),
        ])
    }

    pub fn sqr(&self) -> Self {
        let (a, b) = (self.lo.abs(), self.hi.abs());
        let (near, far) = if self.contains_zero() {
            (F::zero(), Float::max(a, b))
        } else {
            (Float::min(a, b), Float::max(a, b))
        };
        Interval {
            lo: mul_dir(near, near).0,
            hi: mul_dir(far, far).1,
        }
    }

    /// Fails only when the whole interval is negative; a straddling interval
    /// is clipped to the domain of `sqrt`.
    pub fn sqrt(&self) -> DomainResult<Self> {
        if self.hi < F::zero() {
            return Err(DomainError::Invalid("sqrt of a negative interval"));
        }
        let l = Float::max(self.lo, F::zero());
        let sq = |x: F| -> (F, F) {
            let s = x.sqrt();
            if x.is_zero() || x.is_infinite() {
                return (s, s);
            }
            if x < tiny::<F>() {
                return (s.next_down(), s.next_up());
            }
            let r = residual_sign((-s).mul_add(s, x));
            (down(s, r), up(s, r))
        };
        Ok(Interval {
            lo: Float::max(sq(l).0, F::zero()),
            hi: sq(self.hi).1,
        })
    }

    pub fn abs(&self) -> Self {
        if self.lo >= F::zero() {
            *self
        } else if self.hi <= F::zero() {
            self.neg()
        } else {
            Interval {
                lo: F::zero(),
                hi: Float::max(-self.lo, self.hi),
            }
        }
    }

    pub fn min(&self, rhs: &Self) -> Self {
        Interval {
            lo: Float::min(self.lo, rhs.lo),
            hi: Float::min(self.hi, rhs.hi),
        }
    }

    pub fn max(&self, rhs: &Self) -> Self {
        Interval {
            lo: Float::max(self.lo, rhs.lo),
            hi: Float::max(self.hi, rhs.hi),
        }
    }

    /// Endpoint evaluation widened by one ulp, except where `exact` knows the
    /// value (zero and the infinities).
    fn monotone(&self, f: impl Fn(F) -> F, exact: impl Fn(F) -> Option<F>, range: (F, F)) -> Self {
        let lo = exact(self.lo).unwrap_or_else(|| Float::max(f(self.lo).next_down(), range.0));
        let hi = exact(self.hi).unwrap_or_else(|| Float::min(f(self.hi).next_up(), range.1));
        Interval { lo, hi }
    }

    pub fn exp(&self) -> Self {
        let exact = |x: F| {
            if x == F::zero() {
                Some(F::one())
            } else if x == F::infinity() || x == F::neg_infinity() {
                Some(x.exp())
            } else {
                None
            }
        };
        self.monotone(Float::exp, exact, (F::zero(), F::infinity()))
    }

    pub fn tanh(&self) -> Self {
        let exact = |x: F| (x == F::zero() || x.is_infinite()).then(|| x.tanh());
        self.monotone(Float::tanh, exact, (-F::one(), F::one()))
    }

    pub fn sigmoid(&self) -> Self {
        let exact = |x: F| (x == F::zero() || x.is_infinite()).then(|| sigmoid(x));
        self.monotone(sigmoid, exact, (F::zero(), F::one()))
    }
}

impl<F: RealScalar> fmt::Debug for Interval<F> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "[{:?}, {:?}]", self.lo, self.hi)
    }
}

impl<F: RealScalar> ScalarDomain for Interval<F> {
    const NAME: &'static str = "interval";

    fn zero() -> Self {
        Self::point(F::zero())
    }
    fn one() -> Self {
        Self::point(F::one())
    }
    fn from_f64(x: f64) -> DomainResult<Self> {
        if x.is_nan() {
            return Err(DomainError::Invalid("NaN literal"));
        }
        Ok(<Self as IntervalDomain>::enclose(x, x))
    }
    fn add(&self, rhs: &Self) -> DomainResult<Self> {
        Ok(Interval::add(self, rhs))
    }
    fn sub(&self, rhs: &Self) -> DomainResult<Self> {
        Ok(Interval::sub(self, rhs))
    }
    fn mul(&self, rhs: &Self) -> DomainResult<Self> {
        Ok(Interval::mul(self, rhs))
    }
    fn div(&self, rhs: &Self) -> DomainResult<Self> {
        Ok(Interval::div(self, rhs))
    }
    fn neg(&self) -> Self {
        Interval::neg(self)
    }
    fn abs(&self) -> Self {
        Interval::abs(self)
    }
    fn min(&self, rhs: &Self) -> Self {
        Interval::min(self, rhs)
    }
    fn max(&self, rhs: &Self) -> Self {
        Interval::max(self, rhs)
    }
    fn exp(&self) -> DomainResult<Self> {
        Ok(Interval::exp(self))
    }
    fn tanh(&self) -> DomainResult<Self> {
        Ok(Interval::tanh(self))
    }
    fn sigmoid(&self) -> DomainResult<Self> {
        Ok(Interval::sigmoid(self))
    }
    fn sqrt(&self) -> DomainResult<Self> {
        Interval::sqrt(self)
    }
    fn sqr(&self) -> DomainResult<Self> {
        Ok(Interval::sqr(self))
    }
    fn lt(&self, rhs: &Self) -> bool {
        self.hi < rhs.lo
    }
    fn le(&self, rhs: &Self) -> bool {
        self.hi <= rhs.lo
    }
    fn approx(&self) -> f64 {
        let (l, h) = (self.lo.as_f64(), self.hi.as_f64());
        match (l.is_infinite(), h.is_infinite()) {
            (false, false) => 0.5 * l + 0.5 * h,
            (true, false) => h,
            (false, true) => l,
            (true, true) => {
                if l == h {
                    l
                } else {
                    0.0
                }
            }
        }
    }
}

impl<F: RealScalar> IntervalDomain for Interval<F> {
    fn enclose(lo: f64, hi: f64) -> Self {
        if lo.is_nan() || hi.is_nan() {
            return Self::entire();
        }
        let l = F::of_f64(lo);
        let h = F::of_f64(hi);
        let l = if l.as_f64() > lo { l.next_down() } else { l };
        let h = if h.as_f64() < hi { h.next_up() } else { h };
        Interval { lo: l, hi: h }
    }
    fn entire() -> Self {
        Interval::entire()
    }
    fn lo(&self) -> f64 {
        self.lo.as_f64()
    }
    fn hi(&self) -> f64 {
        self.hi.as_f64()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    type I = Interval<f64>;

    #[test]
    fn exact_sums_stay_tight() {
        let r = I::new(0.0, 1.0).add(&I::new(0.5, 0.5));
        assert_eq!((r.lower(), r.upper()), (0.5, 1.5));
    }

    #[test]
    fn inexact_sums_widen() {
        let r = I::point(0.1).add(&I::point(0.2));
        assert!(r.lower() < 0.1 + 0.2 || r.upper() > 0.1 + 0.2);
        assert!(r.lower() <= 0.30000000000000004 && r.upper() >= 0.3);
        assert!(r.upper() - r.lower() <= 2.0 * f64::EPSILON);
    }

    #[test]
    fn division_through_zero() {
        let r = I::new(1.0, 2.0).div(&I::new(-1.0, 1.0));
        assert_eq!(r, I::entire());
        let r = I::new(1.0, 2.0).div(&I::new(4.0, 4.0));
        assert_eq!((r.lower(), r.upper()), (0.25, 0.5));
    }

    #[test]
    fn inexact_division_brackets() {
        let r = I::point(1.0).div(&I::point(3.0));
        assert!(r.lower() < r.upper());
        assert!(r.lower() <= 1.0 / 3.0 && 1.0 / 3.0 <= r.upper());
    }

    #[test]
    fn zero_times_unbounded() {
        let r = I::point(0.0).mul(&I::entire());
        assert_eq!((r.lower(), r.upper()), (0.0, 0.0));
    }

    #[test]
    fn f32_carrier() {
        let r = Interval::<f32>::point(0.1).add(&Interval::point(0.2));
        assert!(r.lower() <= 0.1f32 + 0.2f32 && 0.1f32 + 0.2f32 <= r.upper());
        let e = <Interval<f32> as IntervalDomain>::enclose(0.1, 0.1);
        assert!(e.lo() <= 0.1 && 0.1 <= e.hi());
    }
}
