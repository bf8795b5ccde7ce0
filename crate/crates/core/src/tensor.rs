//! Dense row-major tensors over any scalar domain.

use crate::error::{DomainError, ShapeError};
use crate::scalar::ScalarDomain;
use crate::shape::Shape;

/// Shape-carrying dense tensor. `data.len() == shape.size()` always holds.
#[derive(Debug, Clone, PartialEq)]
pub struct TensorValue<S> {
    shape: Shape,
    data: Vec<S>,
}

impl<S> TensorValue<S> {
    pub fn new(shape: Shape, data: Vec<S>) -> Result<Self, ShapeError> {
        if data.len() != shape.size() {
            return Err(ShapeError::LengthMismatch {
                expected: shape.size(),
                actual: data.len(),
            });
        }
        Ok(TensorValue { shape, data })
    }

    pub fn from_fn(shape: Shape, f: impl FnMut(usize) -> S) -> Self {
        let data = (0..shape.size()).map(f).collect();
        TensorValue { shape, data }
    }

    pub fn scalar(x: S) -> Self {
        TensorValue {
            shape: Shape::Scalar,
            data: vec![x],
        }
    }

    pub fn shape(&self) -> &Shape {
        &self.shape
    }

    pub fn data(&self) -> &[S] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [S] {
        &mut self.data
    }

    pub fn into_data(self) -> Vec<S> {
        self.data
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    /// Element at a multi-index, `None` outside the shape.
    pub fn get(&self, index: &[usize]) -> Option<&S> {
        self.shape.offset(index).map(|o| &self.data[o])
    }

    pub fn map<T>(&self, f: impl FnMut(&S) -> T) -> TensorValue<T> {
        TensorValue {
            shape: self.shape.clone(),
            data: self.data.iter().map(f).collect(),
        }
    }

    pub fn try_map<T, E>(&self, f: impl FnMut(&S) -> Result<T, E>) -> Result<TensorValue<T>, E> {
        Ok(TensorValue {
            shape: self.shape.clone(),
            data: self.data.iter().map(f).collect::<Result<_, _>>()?,
        })
    }

    /// Same data under another shape of equal size.
    pub fn reshaped(self, shape: Shape) -> Result<Self, ShapeError> {
        TensorValue::new(shape, self.data)
    }
}

impl<S: Clone> TensorValue<S> {
    pub fn filled(shape: Shape, x: S) -> Self {
        let data = vec![x; shape.size()];
        TensorValue { shape, data }
    }

    /// Row-major flattening.
    pub fn vec(&self) -> Vec<S> {
        self.data.clone()
    }

    /// Inverse of [`TensorValue::vec`].
    pub fn unvec(shape: Shape, flat: &[S]) -> Result<Self, ShapeError> {
        TensorValue::new(shape, flat.to_vec())
    }
}

impl<S: ScalarDomain> TensorValue<S> {
    pub fn zeros(shape: Shape) -> Self {
        Self::filled(shape, S::zero())
    }

    pub fn zip_with(
        &self,
        other: &Self,
        mut f: impl FnMut(&S, &S) -> Result<S, DomainError>,
    ) -> Result<Self, DomainError> {
        debug_assert_eq!(self.shape, other.shape);
        let data = self
            .data
            .iter()
            .zip(&other.data)
            .map(|(a, b)| f(a, b))
            .collect::<Result<_, _>>()?;
        Ok(TensorValue {
            shape: self.shape.clone(),
            data,
        })
    }

    /// In-place `self += other`.
    pub fn accumulate(&mut self, other: &Self) -> Result<(), DomainError> {
        for (a, b) in self.data.iter_mut().zip(&other.data) {
            *a = a.add(b)?;
        }
        Ok(())
    }
}

impl TensorValue<f64> {
    pub fn from_f64(shape: Shape, data: Vec<f64>) -> Result<Self, ShapeError> {
        Self::new(shape, data)
    }

    /// Converts into another scalar domain via [`ScalarDomain::from_f64`].
    pub fn convert<S: ScalarDomain>(&self) -> Result<TensorValue<S>, DomainError> {
        self.try_map(|x| S::from_f64(*x))
    }
}

/// Inner product `<a, b>` of equally shaped reference tensors, defined as the
/// Euclidean inner product of their row-major flattenings.
pub fn dot(a: &TensorValue<f64>, b: &TensorValue<f64>) -> Result<f64, ShapeError> {
    if a.shape != b.shape {
        return Err(ShapeError::Mismatch {
            expected: a.shape.clone(),
            actual: b.shape.clone(),
        });
    }
    Ok(a.data.iter().zip(&b.data).map(|(x, y)| x * y).sum())
}
