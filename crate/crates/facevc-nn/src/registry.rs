//! Ordered name -> parameter map. Iteration order is insertion order, which
//! keeps optimizer updates and checkpoint layouts deterministic.

use std::collections::HashMap;

use crate::error::{NnError, Result};
use crate::tensor::Tensor;

#[derive(Debug, Default)]
pub struct ParameterRegistry {
    names: Vec<String>,
    index: HashMap<String, usize>,
    tensors: Vec<Tensor>,
}

impl ParameterRegistry {
    pub fn new() -> Self {
        Self::default()
    }

    /// Registers a trainable tensor under a unique name.
    pub fn register(&mut self, name: &str, tensor: Tensor) -> Result<()> {
        if self.index.contains_key(name) {
            return Err(NnError::DuplicateParameter(name.to_string()));
        }
        self.index.insert(name.to_string(), self.tensors.len());
        self.names.push(name.to_string());
        self.tensors.push(tensor.with_requires_grad());
        Ok(())
    }

    pub fn contains(&self, name: &str) -> bool {
        self.index.contains_key(name)
    }

    pub fn get(&self, name: &str) -> Result<&Tensor> {
        self.index
            .get(name)
            .map(|&i| &self.tensors[i])
            .ok_or_else(|| NnError::UnknownParameter(name.to_string()))
    }

    pub fn get_mut(&mut self, name: &str) -> Result<&mut Tensor> {
        match self.index.get(name) {
            Some(&i) => Ok(&mut self.tensors[i]),
            None => Err(NnError::UnknownParameter(name.to_string())),
        }
    }

    /// Replaces the stored values of an existing parameter, keeping its shape.
    pub fn load_values(&mut self, name: &str, values: &Tensor) -> Result<()> {
        let t = self.get_mut(name)?;
        if t.shape() != values.shape() {
            return Err(NnError::DimensionMismatch {
                op: "load_values",
                lhs: t.shape().to_vec(),
                rhs: values.shape().to_vec(),
            });
        }
        t.data_mut().copy_from_slice(values.data());
        Ok(())
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, &Tensor)> {
        self.names
            .iter()
            .map(move |n| (n.as_str(), &self.tensors[self.index[n]]))
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn len(&self) -> usize {
        self.tensors.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tensors.is_empty()
    }

    pub fn total_elements(&self) -> usize {
        self.tensors.iter().map(|t| t.numel()).sum()
    }

    pub fn zero_grads(&mut self) {
        self.tensors.iter_mut().for_each(Tensor::zero_grad);
    }

    pub fn all_finite(&self) -> bool {
        self.tensors.iter().all(Tensor::is_finite)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn duplicate_names_rejected() {
        let mut reg = ParameterRegistry::new();
        reg.register("w", Tensor::zeros(vec![2, 2]).unwrap()).unwrap();
        let err = reg.register("w", Tensor::zeros(vec![2, 2]).unwrap());
        assert!(matches!(err, Err(NnError::DuplicateParameter(_))));
    }

    #[test]
    fn iteration_is_insertion_ordered() {
        let mut reg = ParameterRegistry::new();
        for name in ["zeta", "alpha", "mid"] {
            reg.register(name, Tensor::zeros(vec![1]).unwrap()).unwrap();
        }
        let order: Vec<&str> = reg.iter().map(|(n, _)| n).collect();
        assert_eq!(order, vec!["zeta", "alpha", "mid"]);
    }

    #[test]
    fn registered_tensors_require_grad() {
        let mut reg = ParameterRegistry::new();
        reg.register("w", Tensor::zeros(vec![1]).unwrap()).unwrap();
        assert!(reg.get("w").unwrap().requires_grad());
    }
}
