use crate::error::{DomainError, ShapeError};
use crate::scalar::ScalarDomain;
use crate::shape::Shape;
use crate::tensor::TensorValue;

/// Ordered, named parameter tensors. Keys are unique.
#[derive(Debug, Clone, PartialEq)]
pub struct ParamStore<S> {
    entries: Vec<(String, TensorValue<S>)>,
}

impl<S> Default for ParamStore<S> {
    fn default() -> Self {
        ParamStore {
            entries: Vec::new(),
        }
    }
}

impl<S> ParamStore<S> {
    pub fn new() -> Self {
        Self::default()
    }

    /// Inserts or replaces; a replaced entry keeps its position.
    pub fn insert(&mut self, key: impl Into<String>, value: TensorValue<S>) {
        let key = key.into();
        match self.entries.iter_mut().find(|(k, _)| *k == key) {
            Some(slot) => slot.1 = value,
            None => self.entries.push((key, value)),
        }
    }

    pub fn get(&self, key: &str) -> Option<&TensorValue<S>> {
        self.entries.iter().find(|(k, _)| k == key).map(|(_, v)| v)
    }

    pub fn get_mut(&mut self, key: &str) -> Option<&mut TensorValue<S>> {
        self.entries
            .iter_mut()
            .find(|(k, _)| k == key)
            .map(|(_, v)| v)
    }

    pub fn shape_of(&self, key: &str) -> Option<&Shape> {
        self.get(key).map(|t| t.shape())
    }

    pub fn keys(&self) -> impl Iterator<Item = &str> {
        self.entries.iter().map(|(k, _)| k.as_str())
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, &TensorValue<S>)> {
        self.entries.iter().map(|(k, v)| (k.as_str(), v))
    }

    pub fn values(&self) -> impl Iterator<Item = &TensorValue<S>> {
        self.entries.iter().map(|(_, v)| v)
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn map<T>(&self, mut f: impl FnMut(&TensorValue<S>) -> TensorValue<T>) -> ParamStore<T> {
        ParamStore {
            entries: self
                .entries
                .iter()
                .map(|(k, v)| (k.clone(), f(v)))
                .collect(),
        }
    }

    pub fn try_map<T, E>(
        &self,
        mut f: impl FnMut(&TensorValue<S>) -> Result<TensorValue<T>, E>,
    ) -> Result<ParamStore<T>, E> {
        let entries = self
            .entries
            .iter()
            .map(|(k, v)| Ok((k.clone(), f(v)?)))
            .collect::<Result<_, E>>()?;
        Ok(ParamStore { entries })
    }

    /// Same keys in the same order with equal shapes.
    pub fn same_layout<T>(&self, other: &ParamStore<T>) -> bool {
        self.entries.len() == other.entries.len()
            && self
                .entries
                .iter()
                .zip(&other.entries)
                .all(|((k1, v1), (k2, v2))| k1 == k2 && v1.shape() == v2.shape())
    }

    pub fn check_layout<T>(&self, other: &ParamStore<T>) -> Result<(), ShapeError> {
        for ((k1, v1), (k2, v2)) in self.entries.iter().zip(&other.entries) {
            if k1 != k2 || v1.shape() != v2.shape() {
                return Err(ShapeError::Mismatch {
                    expected: v1.shape().clone(),
                    actual: v2.shape().clone(),
                });
            }
        }
        if self.entries.len() != other.entries.len() {
            return Err(ShapeError::LengthMismatch {
                expected: self.entries.len(),
                actual: other.entries.len(),
            });
        }
        Ok(())
    }
}

impl<S: ScalarDomain> ParamStore<S> {
    pub fn zeros_like<T>(other: &ParamStore<T>) -> Self {
        other.map(|t| TensorValue::zeros(t.shape().clone()))
    }
}

impl ParamStore<f64> {
    pub fn convert<S: ScalarDomain>(&self) -> Result<ParamStore<S>, DomainError> {
        self.try_map(|t| t.convert())
    }
}
