use std::fmt::Debug;

use num_traits::Float;

use super::{DomainResult, ScalarDomain};

/// Host binary floating-point types usable as a real carrier.
///
/// Adds the neighbour functions needed for outward rounding on top of
/// [`num_traits::Float`].
pub trait RealScalar: Float + Debug + Send + Sync + 'static {
    const NAME: &'static str;
    fn next_up(self) -> Self;
    fn next_down(self) -> Self;
    fn as_f64(self) -> f64;
    fn of_f64(x: f64) -> Self;
}

impl RealScalar for f64 {
    const NAME: &'static str = "real";
    fn next_up(self) -> Self {
        f64::next_up(self)
    }
    fn next_down(self) -> Self {
        f64::next_down(self)
    }
    fn as_f64(self) -> f64 {
        self
    }
    fn of_f64(x: f64) -> Self {
        x
    }
}

impl RealScalar for f32 {
    const NAME: &'static str = "f32";
    fn next_up(self) -> Self {
        f32::next_up(self)
    }
    fn next_down(self) -> Self {
        f32::next_down(self)
    }
    fn as_f64(self) -> f64 {
        self as f64
    }
    fn of_f64(x: f64) -> Self {
        x as f32
    }
}

pub(crate) fn sigmoid<F: Float>(x: F) -> F {
    if x >= F::zero() {
        F::one() / (F::one() + (-x).exp())
    } else {
        let e = x.exp();
        e / (F::one() + e)
    }
}

impl<F: RealScalar> ScalarDomain for F {
    const NAME: &'static str = <F as RealScalar>::NAME;

    fn zero() -> Self {
        <F as num_traits::Zero>::zero()
    }
    fn one() -> Self {
        <F as num_traits::One>::one()
    }
    fn from_f64(x: f64) -> DomainResult<Self> {
        Ok(F::of_f64(x))
    }
    fn add(&self, rhs: &Self) -> DomainResult<Self> {
        Ok(*self + *rhs)
    }
    fn sub(&self, rhs: &Self) -> DomainResult<Self> {
        Ok(*self - *rhs)
    }
    fn mul(&self, rhs: &Self) -> DomainResult<Self> {
        Ok(*self * *rhs)
    }
    fn div(&self, rhs: &Self) -> DomainResult<Self> {
        Ok(*self / *rhs)
    }
    fn neg(&self) -> Self {
        -*self
    }
    fn abs(&self) -> Self {
        Float::abs(*self)
    }
    fn min(&self, rhs: &Self) -> Self {
        Float::min(*self, *rhs)
    }
    fn max(&self, rhs: &Self) -> Self {
        Float::max(*self, *rhs)
    }
    fn exp(&self) -> DomainResult<Self> {
        Ok(Float::exp(*self))
    }
    fn tanh(&self) -> DomainResult<Self> {
        Ok(Float::tanh(*self))
    }
    fn sigmoid(&self) -> DomainResult<Self> {
        Ok(sigmoid(*self))
    }
    fn sqrt(&self) -> DomainResult<Self> {
        Ok(Float::sqrt(*self))
    }
    fn lt(&self, rhs: &Self) -> bool {
        *self < *rhs
    }
    fn le(&self, rhs: &Self) -> bool {
        *self <= *rhs
    }
    fn approx(&self) -> f64 {
        self.as_f64()
    }
}
