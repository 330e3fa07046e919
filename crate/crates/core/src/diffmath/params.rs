use std::collections::BTreeMap;

use super::tensor::{Scalar, Tensor};
use crate::error::{Error, Result};

/// Named parameters with a shape-matched gradient accumulator per name.
///
/// Backed by `BTreeMap`, so iteration is always sorted by name.
#[derive(Clone, Debug, PartialEq)]
pub struct ParamStore<T: Scalar = f32> {
    values: BTreeMap<String, Tensor<T>>,
    grads: BTreeMap<String, Tensor<T>>,
}

impl<T: Scalar> Default for ParamStore<T> {
    fn default() -> Self {
        Self {
            values: BTreeMap::new(),
            grads: BTreeMap::new(),
        }
    }
}

impl<T: Scalar> ParamStore<T> {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn insert(&mut self, name: impl Into<String>, value: Tensor<T>) -> Result<()> {
        let name = name.into();
        if self.values.contains_key(&name) {
            return Err(Error::Invalid(format!("duplicate parameter name `{name}`")));
        }
        self.grads
            .insert(name.clone(), Tensor::zeros(value.shape()));
        self.values.insert(name, value);
        Ok(())
    }

    pub fn get(&self, name: &str) -> Result<&Tensor<T>> {
        self.values
            .get(name)
            .ok_or_else(|| Error::Invalid(format!("missing parameter `{name}`")))
    }

    pub fn get_mut(&mut self, name: &str) -> Result<&mut Tensor<T>> {
        self.values
            .get_mut(name)
            .ok_or_else(|| Error::Invalid(format!("missing parameter `{name}`")))
    }

    /// Replace a parameter's value, keeping its shape.
    pub fn set(&mut self, name: &str, value: Tensor<T>) -> Result<()> {
        let slot = self.get_mut(name)?;
        slot.check_same_shape("ParamStore::set", &value)?;
        *slot = value;
        Ok(())
    }

    pub fn grad(&self, name: &str) -> Result<&Tensor<T>> {
        self.grads
            .get(name)
            .ok_or_else(|| Error::Invalid(format!("missing gradient `{name}`")))
    }

    pub fn grad_mut(&mut self, name: &str) -> Result<&mut Tensor<T>> {
        self.grads
            .get_mut(name)
            .ok_or_else(|| Error::Invalid(format!("missing gradient `{name}`")))
    }

    pub fn accumulate_grad(&mut self, name: &str, delta: &Tensor<T>) -> Result<()> {
        self.grad_mut(name)?.add_assign(delta)
    }

    pub fn zero_grads(&mut self) {
        self.grads.values_mut().for_each(|g| g.fill(T::ZERO));
    }

    /// Add another store's gradients into this one (same parameter set).
    pub fn add_grads_from(&mut self, other: &ParamStore<T>) -> Result<()> {
        for (name, g) in &other.grads {
            self.accumulate_grad(name, g)?;
        }
        Ok(())
    }

    pub fn scale_grads(&mut self, factor: T) {
        self.grads.values_mut().for_each(|g| g.scale(factor));
    }

    pub fn names(&self) -> impl Iterator<Item = &str> {
        self.values.keys().map(String::as_str)
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, &Tensor<T>)> {
        self.values.iter().map(|(k, v)| (k.as_str(), v))
    }

    /// `(name, value, grad)` triples in name order.
    pub fn iter_with_grads(&self) -> impl Iterator<Item = (&str, &Tensor<T>, &Tensor<T>)> {
        self.values
            .iter()
            .zip(self.grads.values())
            .map(|((k, v), g)| (k.as_str(), v, g))
    }

    /// Mutable values alongside read-only gradients, in name order.
    pub fn iter_values_mut_with_grads(
        &mut self,
    ) -> impl Iterator<Item = (&str, &mut Tensor<T>, &Tensor<T>)> {
        self.values
            .iter_mut()
            .zip(self.grads.values())
            .map(|((k, v), g)| (k.as_str(), v, g))
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// Total number of scalar parameters.
    pub fn num_scalars(&self) -> usize {
        self.values.values().map(Tensor::len).sum()
    }

    /// Copy of the store with zeroed gradients, at another precision.
    pub fn cast<U: Scalar>(&self) -> ParamStore<U> {
        ParamStore {
            values: self
                .values
                .iter()
                .map(|(k, v)| (k.clone(), v.cast()))
                .collect(),
            grads: self
                .values
                .iter()
                .map(|(k, v)| (k.clone(), Tensor::zeros(v.shape())))
                .collect(),
        }
    }

    /// Same parameter names and shapes, zero values and gradients.
    pub fn zeros_like(&self) -> ParamStore<T> {
        ParamStore {
            values: self
                .values
                .iter()
                .map(|(k, v)| (k.clone(), Tensor::zeros(v.shape())))
                .collect(),
            grads: self
                .values
                .iter()
                .map(|(k, v)| (k.clone(), Tensor::zeros(v.shape())))
                .collect(),
        }
    }
}
