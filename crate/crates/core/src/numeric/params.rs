use std::collections::BTreeMap;

use super::{NumericError, Scalar, Tensor};

#[derive(Debug, Clone, PartialEq)]
pub struct Parameter<T> {
    pub value: Tensor<T>,
    pub grad: Tensor<T>,
}

/// Named trainable arrays of one model together with their gradient buffers.
///
/// A frozen store ignores gradient accumulation and is skipped by optimizers,
/// so its values stay bit-identical for as long as the flag is set.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct ParameterStore<T> {
    entries: BTreeMap<String, Parameter<T>>,
    frozen: bool,
}

impl<T: Scalar> ParameterStore<T> {
    pub fn new() -> Self {
        Self {
            entries: BTreeMap::new(),
            frozen: false,
        }
    }

    pub fn insert(&mut self, name: impl Into<String>, value: Tensor<T>) {
        let grad = value.zeros_like();
        self.entries.insert(name.into(), Parameter { value, grad });
    }

    pub fn is_frozen(&self) -> bool {
        self.frozen
    }

    pub fn set_frozen(&mut self, frozen: bool) {
        self.frozen = frozen;
    }

    pub fn get(&self, name: &str) -> Option<&Parameter<T>> {
        self.entries.get(name)
    }

    pub fn value(&self, name: &str) -> Result<&Tensor<T>, NumericError> {
        self.entries
            .get(name)
            .map(|p| &p.value)
            .ok_or_else(|| NumericError::UnknownParameter(name.to_string()))
    }

    pub fn value_mut(&mut self, name: &str) -> Result<&mut Tensor<T>, NumericError> {
        self.entries
            .get_mut(name)
            .map(|p| &mut p.value)
            .ok_or_else(|| NumericError::UnknownParameter(name.to_string()))
    }

    pub fn grad(&self, name: &str) -> Result<&Tensor<T>, NumericError> {
        self.entries
            .get(name)
            .map(|p| &p.grad)
            .ok_or_else(|| NumericError::UnknownParameter(name.to_string()))
    }

    /// Adds `grad` into the parameter's buffer. No-op while frozen.
    pub fn accumulate_grad(&mut self, name: &str, grad: &Tensor<T>) -> Result<(), NumericError> {
        let frozen = self.frozen;
        let p = self
            .entries
            .get_mut(name)
            .ok_or_else(|| NumericError::UnknownParameter(name.to_string()))?;
        p.grad.require_same_shape(grad)?;
        if !frozen {
            p.grad.add_assign(grad)?;
        }
        Ok(())
    }

    pub fn zero_grads(&mut self) {
        for p in self.entries.values_mut() {
            p.grad.fill(T::zero());
        }
    }

    pub fn names(&self) -> impl Iterator<Item = &str> {
        self.entries.keys().map(String::as_str)
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, &Parameter<T>)> {
        self.entries.iter().map(|(k, v)| (k.as_str(), v))
    }

    pub fn iter_mut(&mut self) -> impl Iterator<Item = (&str, &mut Parameter<T>)> {
        self.entries.iter_mut().map(|(k, v)| (k.as_str(), v))
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// Total number of scalar parameters.
    pub fn parameter_count(&self) -> usize {
        self.entries.values().map(|p| p.value.len()).sum()
    }

    /// Replaces every value with the given arrays. Names and shapes must match
    /// exactly; nothing is modified on error. The frozen flag is untouched.
    pub fn replace_values(&mut self, values: BTreeMap<String, Tensor<T>>) -> Result<(), NumericError> {
        for (name, p) in &self.entries {
            let v = values
                .get(name)
                .ok_or_else(|| NumericError::UnknownParameter(name.clone()))?;
            if v.shape() != p.value.shape() {
                return Err(NumericError::ParameterShape {
                    name: name.clone(),
                    expected: p.value.shape().to_vec(),
                    actual: v.shape().to_vec(),
                });
            }
        }
        if let Some(extra) = values.keys().find(|k| !self.entries.contains_key(*k)) {
            return Err(NumericError::UnknownParameter(extra.clone()));
        }
        for (name, v) in values {
            let p = self.entries.get_mut(&name).expect("checked above");
            p.value = v;
        }
        Ok(())
    }
}
