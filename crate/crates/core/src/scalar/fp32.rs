use std::fmt;

use super::{DomainResult, RoundingMode, ScalarDomain};
use crate::error::DomainError;
use crate::ieee32::B32;

/// Rounds a binary64 value onto the binary32 grid, returned as binary64.
///
/// Ties go to even under `NearestEven`; directed modes pick the neighbour on the
/// requested side. Beyond the largest finite value the IEEE overflow rules of
/// the mode apply, so the result may be infinite. NaN passes through.
pub fn fp32_round(x: f64, mode: RoundingMode) -> f64 {
    if x.is_nan() {
        return x;
    }
    B32::from_real(x, mode).to_f64()
}

/// Round-on-reals binary32 model: each operation is computed in binary64 and
/// rounded to nearest binary32. Finite only: overflow and invalid operations
/// are domain errors rather than infinities or NaN.
#[derive(Clone, Copy, PartialEq, PartialOrd)]
pub struct Fp32(f64);

impl Fp32 {
    /// Rounds `x` to nearest; fails if the result is not finite.
    pub fn new(x: f64) -> DomainResult<Self> {
        if x.is_nan() {
            return Err(DomainError::Invalid("NaN is outside the finite model"));
        }
        let r = fp32_round(x, RoundingMode::NearestEven);
        if r.is_infinite() {
            return Err(DomainError::Overflow);
        }
        Ok(Fp32(r))
    }

    pub fn value(self) -> f64 {
        self.0
    }

    pub fn to_b32(self) -> B32 {
        B32::from_real(self.0, RoundingMode::NearestEven)
    }
}

impl fmt::Debug for Fp32 {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Fp32({})", self.0)
    }
}

impl ScalarDomain for Fp32 {
    const NAME: &'static str = "fp32";

    fn zero() -> Self {
        Fp32(0.0)
    }
    fn one() -> Self {
        Fp32(1.0)
    }
    fn from_f64(x: f64) -> DomainResult<Self> {
        Fp32::new(x)
    }
    fn add(&self, rhs: &Self) -> DomainResult<Self> {
        Fp32::new(self.0 + rhs.0)
    }
    fn sub(&self, rhs: &Self) -> DomainResult<Self> {
        Fp32::new(self.0 - rhs.0)
    }
    fn mul(&self, rhs: &Self) -> DomainResult<Self> {
        Fp32::new(self.0 * rhs.0)
    }
    fn div(&self, rhs: &Self) -> DomainResult<Self> {
        if rhs.0 == 0.0 {
            return Err(DomainError::Invalid("division by zero"));
        }
        Fp32::new(self.0 / rhs.0)
    }
    fn neg(&self) -> Self {
        Fp32(-self.0)
    }
    fn abs(&self) -> Self {
        Fp32(self.0.abs())
    }
    fn min(&self, rhs: &Self) -> Self {
        Fp32(self.0.min(rhs.0))
    }
    fn max(&self, rhs: &Self) -> Self {
        Fp32(self.0.max(rhs.0))
    }
    fn exp(&self) -> DomainResult<Self> {
        Fp32::new(self.0.exp())
    }
    fn tanh(&self) -> DomainResult<Self> {
        Fp32::new(self.0.tanh())
    }
    fn sigmoid(&self) -> DomainResult<Self> {
        Fp32::new(super::sigmoid_f64(self.0))
    }
    fn sqrt(&self) -> DomainResult<Self> {
        if self.0 < 0.0 {
            return Err(DomainError::Invalid("sqrt of a negative value"));
        }
        Fp32::new(self.0.sqrt())
    }
    fn lt(&self, rhs: &Self) -> bool {
        self.0 < rhs.0
    }
    fn le(&self, rhs: &Self) -> bool {
        self.0 <= rhs.0
    }
    fn approx(&self) -> f64 {
        self.0
    }
}
