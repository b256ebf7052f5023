use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;

use super::Tensor;
use crate::{Error, Result, Scalar};

/// Index of a parameter inside its [`ParamSet`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct ParamId(pub usize);

#[derive(Debug, Clone, PartialEq)]
pub struct Param<S> {
    pub name: String,
    pub tensor: Tensor<S>,
    pub trainable: bool,
}

/// Named parameters in insertion order. Shapes are fixed once inserted.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct ParamSet<S> {
    entries: Vec<Param<S>>,
}

impl<S: Scalar> ParamSet<S> {
    pub fn new() -> Self {
        ParamSet {
            entries: Vec::new(),
        }
    }

    pub fn insert(&mut self, name: &str, tensor: Tensor<S>, trainable: bool) -> Result<ParamId> {
        if self.find(name).is_some() {
            return Err(Error::contract(format!("duplicate parameter name `{name}`")));
        }
        self.entries.push(Param {
            name: name.into(),
            tensor,
            trainable,
        });
        Ok(ParamId(self.entries.len() - 1))
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn find(&self, name: &str) -> Option<ParamId> {
        self.entries.iter().position(|p| p.name == name).map(ParamId)
    }

    pub fn id(&self, name: &str) -> Result<ParamId> {
        self.find(name)
            .ok_or_else(|| Error::contract(format!("no parameter named `{name}`")))
    }

    pub fn get(&self, id: ParamId) -> &Tensor<S> {
        &self.entries[id.0].tensor
    }

    pub fn by_name(&self, name: &str) -> Option<&Tensor<S>> {
        self.find(name).map(|id| self.get(id))
    }

    pub fn entry(&self, id: ParamId) -> &Param<S> {
        &self.entries[id.0]
    }

    pub fn iter(&self) -> impl Iterator<Item = (ParamId, &Param<S>)> {
        self.entries.iter().enumerate().map(|(i, p)| (ParamId(i), p))
    }

    /// Mutable access to values; shapes cannot change.
    pub fn values_mut(&mut self, id: ParamId) -> &mut [S] {
        self.entries[id.0].tensor.data_mut()
    }

    /// Replaces a tensor with one of identical shape.
    pub fn set(&mut self, id: ParamId, tensor: Tensor<S>) -> Result<()> {
        let cur = &mut self.entries[id.0];
        if cur.tensor.dims() != tensor.dims() {
            return Err(Error::shape(
                "param_set",
                format!("`{}` is {:?}, got {:?}", cur.name, cur.tensor.dims(), tensor.dims()),
            ));
        }
        cur.tensor = tensor;
        Ok(())
    }

    pub fn scalar_count(&self) -> usize {
        self.entries.iter().map(|p| p.tensor.len()).sum()
    }

    pub fn all_finite(&self) -> bool {
        self.entries.iter().all(|p| p.tensor.all_finite())
    }

    pub fn cast<T: Scalar>(&self) -> ParamSet<T> {
        ParamSet {
            entries: self
                .entries
                .iter()
                .map(|p| Param {
                    name: p.name.clone(),
                    tensor: p.tensor.cast(),
                    trainable: p.trainable,
                })
                .collect(),
        }
    }
}

/// One gradient tensor per parameter, aligned with a [`ParamSet`].
#[derive(Debug, Clone, PartialEq)]
pub struct Grads<S> {
    tensors: Vec<Tensor<S>>,
}

impl<S: Scalar> Grads<S> {
    pub fn zeros_like(params: &ParamSet<S>) -> Self {
        Grads {
            tensors: params.iter().map(|(_, p)| Tensor::zeros(p.tensor.dims())).collect(),
        }
    }

    pub fn from_tensors(tensors: Vec<Tensor<S>>) -> Self {
        Grads { tensors }
    }

    pub fn len(&self) -> usize {
        self.tensors.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tensors.is_empty()
    }

    pub fn get(&self, id: ParamId) -> &Tensor<S> {
        &self.tensors[id.0]
    }

    pub fn get_mut(&mut self, id: ParamId) -> &mut Tensor<S> {
        &mut self.tensors[id.0]
    }

    pub fn iter(&self) -> impl Iterator<Item = &Tensor<S>> {
        self.tensors.iter()
    }

    pub fn iter_mut(&mut self) -> impl Iterator<Item = &mut Tensor<S>> {
        self.tensors.iter_mut()
    }

    pub fn add_assign(&mut self, other: &Grads<S>) {
        for (a, b) in self.tensors.iter_mut().zip(&other.tensors) {
            a.add_assign(b);
        }
    }

    pub fn all_finite(&self) -> bool {
        self.tensors.iter().all(|t| t.all_finite())
    }
}
