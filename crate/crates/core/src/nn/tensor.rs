use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use crate::{Error, Result, Scalar};

/// Dense row-major array.
#[derive(Debug, Clone, PartialEq)]
pub struct Tensor<S> {
    dims: Vec<usize>,
    data: Vec<S>,
}

impl<S: Scalar> Tensor<S> {
    pub fn new(dims: &[usize], data: Vec<S>) -> Result<Self> {
        if dims.contains(&0) {
            return Err(Error::shape("tensor", format!("zero-sized axis in {dims:?}")));
        }
        let n: usize = dims.iter().product();
        if n != data.len() {
            return Err(Error::shape(
                "tensor",
                format!("dims {dims:?} hold {n} values, got {}", data.len()),
            ));
        }
        Ok(Tensor {
            dims: dims.to_vec(),
            data,
        })
    }

    pub fn zeros(dims: &[usize]) -> Self {
        Self::full(dims, S::ZERO)
    }

    pub fn full(dims: &[usize], v: S) -> Self {
        let n = dims.iter().product();
        Tensor {
            dims: dims.to_vec(),
            data: vec![v; n],
        }
    }

    pub fn from_vec(data: Vec<S>) -> Self {
        Tensor {
            dims: vec![data.len()],
            data,
        }
    }

    pub fn scalar(v: S) -> Self {
        Tensor {
            dims: vec![1],
            data: vec![v],
        }
    }

    pub fn from_f64(dims: &[usize], data: &[f64]) -> Result<Self> {
        Self::new(dims, data.iter().map(|&v| S::from_f64(v)).collect())
    }

    pub fn dims(&self) -> &[usize] {
        &self.dims
    }

    pub fn rank(&self) -> usize {
        self.dims.len()
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
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

    pub fn reshape(mut self, dims: &[usize]) -> Result<Self> {
        let n: usize = dims.iter().product();
        if n != self.data.len() {
            return Err(Error::shape(
                "reshape",
                format!("{:?} -> {dims:?} changes element count", self.dims),
            ));
        }
        self.dims = dims.to_vec();
        Ok(self)
    }

    pub fn map(&self, f: impl Fn(S) -> S) -> Self {
        Tensor {
            dims: self.dims.clone(),
            data: self.data.iter().map(|&v| f(v)).collect(),
        }
    }

    pub fn add_assign(&mut self, other: &Tensor<S>) {
        debug_assert_eq!(self.dims, other.dims);
        for (a, &b) in self.data.iter_mut().zip(&other.data) {
            *a += b;
        }
    }

    pub fn scale(&mut self, k: S) {
        for v in &mut self.data {
            *v *= k;
        }
    }

    pub fn dot(&self, other: &Tensor<S>) -> S {
        self.data
            .iter()
            .zip(&other.data)
            .fold(S::ZERO, |acc, (&a, &b)| acc + a * b)
    }

    pub fn sum(&self) -> S {
        self.data.iter().fold(S::ZERO, |acc, &v| acc + v)
    }

    pub fn all_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }

    /// Element type conversion via `f64`.
    pub fn cast<T: Scalar>(&self) -> Tensor<T> {
        Tensor {
            dims: self.dims.clone(),
            data: self.data.iter().map(|v| T::from_f64(v.to_f64())).collect(),
        }
    }

    /// Rows `start..start + count` along the leading axis.
    pub fn rows(&self, start: usize, count: usize) -> Tensor<S> {
        let row: usize = self.dims[1..].iter().product();
        let mut dims = self.dims.clone();
        dims[0] = count;
        Tensor {
            dims,
            data: self.data[start * row..(start + count) * row].to_vec(),
        }
    }
}
