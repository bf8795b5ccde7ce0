//! Tensor shapes as an inductive tree: a scalar, or `n` copies of a sub-shape.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::ShapeError;

/// A tensor shape.
///
/// `Scalar` is the leaf; `Dim(n, inner)` is `n >= 1` copies of `inner`.
/// The flat dims view (`[2, 3]` for a 2x3 matrix) is what the JSON formats use.
#[derive(Clone, PartialEq, Eq, Hash)]
pub enum Shape {
    Scalar,
    Dim(usize, Box<Shape>),
}

impl Shape {
    pub fn scalar() -> Self {
        Shape::Scalar
    }

    pub fn vector(n: usize) -> Self {
        Self::from_dims(&[n]).expect("vector length must be positive")
    }

    pub fn matrix(m: usize, n: usize) -> Self {
        Self::from_dims(&[m, n]).expect("matrix dims must be positive")
    }

    /// Builds a shape from outermost-first dims. Every dim must be >= 1.
    pub fn from_dims(dims: &[usize]) -> Result<Self, ShapeError> {
        let mut shape = Shape::Scalar;
        for &d in dims.iter().rev() {
            if d == 0 {
                return Err(ShapeError::ZeroDim(dims.to_vec()));
            }
            shape = Shape::Dim(d, Box::new(shape));
        }
        Ok(shape)
    }

    pub fn dims(&self) -> Vec<usize> {
        let mut out = Vec::new();
        let mut cur = self;
        while let Shape::Dim(n, inner) = cur {
            out.push(*n);
            cur = inner;
        }
        out
    }

    pub fn rank(&self) -> usize {
        match self {
            Shape::Scalar => 0,
            Shape::Dim(_, inner) => 1 + inner.rank(),
        }
    }

    /// Number of scalar entries; 1 for a scalar.
    pub fn size(&self) -> usize {
        match self {
            Shape::Scalar => 1,
            Shape::Dim(n, inner) => n * inner.size(),
        }
    }

    pub fn is_scalar(&self) -> bool {
        matches!(self, Shape::Scalar)
    }

    /// Row-major strides for the flat dims.
    pub fn strides(&self) -> Vec<usize> {
        let dims = self.dims();
        let mut strides = vec![1; dims.len()];
        for i in (0..dims.len().saturating_sub(1)).rev() {
            strides[i] = strides[i + 1] * dims[i + 1];
        }
        strides
    }

    /// Row-major offset of a multi-index, or `None` when out of bounds.
    pub fn offset(&self, index: &[usize]) -> Option<usize> {
        let dims = self.dims();
        if index.len() != dims.len() {
            return None;
        }
        let mut off = 0;
        for (&i, &d) in index.iter().zip(&dims) {
            if i >= d {
                return None;
            }
            off = off * d + i;
        }
        Some(off)
    }
}

impl fmt::Debug for Shape {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:?}", self.dims())
    }
}

impl fmt::Display for Shape {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Debug::fmt(self, f)
    }
}

impl Serialize for Shape {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        self.dims().serialize(s)
    }
}

impl<'de> Deserialize<'de> for Shape {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let dims = Vec::<usize>::deserialize(d)?;
        Shape::from_dims(&dims).map_err(serde::de::Error::custom)
    }
}
