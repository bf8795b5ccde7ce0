//! Scalar domains: the numeric interface every evaluator is generic over.
//!
//! One graph runs unchanged over host reals ([`f64`] as the reference, [`f32`]),
//! the round-on-reals binary32 model ([`Fp32`]), the bit-level kernel
//! ([`crate::ieee32::B32`]) and the enclosure domains ([`Interval`],
//! [`crate::ieee32::B32Interval`]).

mod fp32;
mod interval;
mod real;

use std::fmt::Debug;

pub use fp32::{fp32_round, Fp32};
pub use interval::Interval;
pub use real::RealScalar;

use crate::error::DomainError;

pub type DomainResult<T> = Result<T, DomainError>;

/// Logistic function in binary64, evaluated without overflow for either sign.
pub fn sigmoid_f64(x: f64) -> f64 {
    real::sigmoid(x)
}

/// IEEE rounding directions used by the kernel and interval endpoints.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum RoundingMode {
    NearestEven,
    TowardNegInf,
    TowardPosInf,
}

/// The operations a scalar type must provide to run graph code.
///
/// Arithmetic is fallible so finite-only domains can report overflow; the
/// enclosure domains never fail (division through zero widens instead).
pub trait ScalarDomain: Clone + Debug + PartialEq + Send + Sync + 'static {
    /// Short name used in reports (`real`, `fp32`, `ieee32`, ...).
    const NAME: &'static str;

    fn zero() -> Self;
    fn one() -> Self;

    /// Embeds a binary64 constant (weights, literals, counts).
    fn from_f64(x: f64) -> DomainResult<Self>;

    fn from_literal(s: &str) -> DomainResult<Self> {
        let x: f64 = s
            .trim()
            .parse()
            .map_err(|_| DomainError::Invalid("unparsable decimal literal"))?;
        Self::from_f64(x)
    }

    fn add(&self, rhs: &Self) -> DomainResult<Self>;
    fn sub(&self, rhs: &Self) -> DomainResult<Self>;
    fn mul(&self, rhs: &Self) -> DomainResult<Self>;
    fn div(&self, rhs: &Self) -> DomainResult<Self>;
    fn neg(&self) -> Self;
    fn abs(&self) -> Self;
    fn min(&self, rhs: &Self) -> Self;
    fn max(&self, rhs: &Self) -> Self;

    fn exp(&self) -> DomainResult<Self>;
    fn tanh(&self) -> DomainResult<Self>;
    fn sigmoid(&self) -> DomainResult<Self>;
    fn sqrt(&self) -> DomainResult<Self>;

    /// Decidable strict order. Enclosure domains answer "certainly less".
    fn lt(&self, rhs: &Self) -> bool;
    fn le(&self, rhs: &Self) -> bool;

    fn sqr(&self) -> DomainResult<Self> {
        self.mul(self)
    }

    fn relu(&self) -> Self {
        self.max(&Self::zero())
    }

    /// Representative binary64 value for reporting (midpoint for intervals).
    fn approx(&self) -> f64;
}

/// Primitive scalar operations, used by the generic dispatcher [`domain_eval`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ScalarOp {
    Add,
    Sub,
    Mul,
    Div,
    Neg,
    Abs,
    Min,
    Max,
    Exp,
    Tanh,
    Sigmoid,
    Sqrt,
}

impl ScalarOp {
    pub fn arity(self) -> usize {
        match self {
            ScalarOp::Add | ScalarOp::Sub | ScalarOp::Mul | ScalarOp::Div => 2,
            ScalarOp::Min | ScalarOp::Max => 2,
            _ => 1,
        }
    }
}

/// Applies `op` in domain `S`.
pub fn domain_eval<S: ScalarDomain>(op: ScalarOp, operands: &[S]) -> DomainResult<S> {
    if operands.len() != op.arity() {
        return Err(DomainError::Invalid("operand count does not match arity"));
    }
    let a = &operands[0];
    match op {
        ScalarOp::Add => a.add(&operands[1]),
        ScalarOp::Sub => a.sub(&operands[1]),
        ScalarOp::Mul => a.mul(&operands[1]),
        ScalarOp::Div => a.div(&operands[1]),
        ScalarOp::Min => Ok(a.min(&operands[1])),
        ScalarOp::Max => Ok(a.max(&operands[1])),
        ScalarOp::Neg => Ok(a.neg()),
        ScalarOp::Abs => Ok(a.abs()),
        ScalarOp::Exp => a.exp(),
        ScalarOp::Tanh => a.tanh(),
        ScalarOp::Sigmoid => a.sigmoid(),
        ScalarOp::Sqrt => a.sqrt(),
    }
}

/// An enclosure domain: every value denotes a closed set `[lo, hi]` of reals
/// (endpoints may be infinite). Bound propagation is generic over this.
pub trait IntervalDomain: ScalarDomain {
    /// Smallest element of the domain containing `[lo, hi]`.
    fn enclose(lo: f64, hi: f64) -> Self;
    fn entire() -> Self;
    fn lo(&self) -> f64;
    fn hi(&self) -> f64;

    fn point(x: f64) -> Self {
        Self::enclose(x, x)
    }

    fn contains(&self, x: f64) -> bool {
        self.lo() <= x && x <= self.hi()
    }

    fn hull(&self, other: &Self) -> Self {
        Self::enclose(self.lo().min(other.lo()), self.hi().max(other.hi()))
    }

    /// Intersection; `None` when disjoint.
    fn intersect(&self, other: &Self) -> Option<Self> {
        let lo = self.lo().max(other.lo());
        let hi = self.hi().min(other.hi());
        (lo <= hi).then(|| Self::enclose(lo, hi))
    }

    fn width(&self) -> f64 {
        self.hi() - self.lo()
    }
}
