//! Dense row-major tensors and the reverse-mode tape that differentiates them.

mod gradcheck;
mod tape;

pub use gradcheck::{finite_difference_check, finite_difference_report, GradCheckReport};
pub use tape::{Gradients, Tape, Var};

use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// Dense row-major array. The last dimension is contiguous and the batch
/// dimension, when present, comes first.
#[derive(Clone, Debug, PartialEq)]
pub struct Tensor<T> {
    shape: Vec<usize>,
    values: Vec<T>,
}

impl<T: Scalar> Tensor<T> {
    pub fn new(shape: Vec<usize>, values: Vec<T>) -> Result<Self> {
        if shape.is_empty() || shape.contains(&0) {
            return Err(Error::dim("tensor", &[&shape]));
        }
        if shape.iter().product::<usize>() != values.len() {
            return Err(Error::Dimension {
                op: "tensor",
                shapes: vec![shape, vec![values.len()]],
            });
        }
        Ok(Tensor { shape, values })
    }

    /// Builds a tensor whose shape and length were already checked.
    pub(crate) fn from_parts(shape: Vec<usize>, values: Vec<T>) -> Self {
        debug_assert_eq!(shape.iter().product::<usize>(), values.len());
        Tensor { shape, values }
    }

    pub fn zeros(shape: &[usize]) -> Self {
        let n = shape.iter().product();
        Tensor::from_parts(shape.to_vec(), vec![T::zero(); n])
    }

    pub fn full(shape: &[usize], v: T) -> Self {
        let n = shape.iter().product();
        Tensor::from_parts(shape.to_vec(), vec![v; n])
    }

    pub fn scalar(v: T) -> Self {
        Tensor::from_parts(vec![1], vec![v])
    }

    pub fn vector(values: Vec<T>) -> Self {
        Tensor::from_parts(vec![values.len()], values)
    }

    pub fn identity(n: usize) -> Self {
        let mut t = Tensor::zeros(&[n, n]);
        for i in 0..n {
            t.values[i * n + i] = T::one();
        }
        t
    }

    pub fn shape(&self) -> &[usize] {
        &self.shape
    }

    pub fn values(&self) -> &[T] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [T] {
        &mut self.values
    }

    pub fn into_values(self) -> Vec<T> {
        self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn last_dim(&self) -> usize {
        *self.shape.last().expect("tensor shape is never empty")
    }

    /// The single value of a one-element tensor.
    pub fn item(&self) -> Option<T> {
        (self.values.len() == 1).then(|| self.values[0])
    }

    pub fn is_finite(&self) -> bool {
        self.values.iter().all(|v| v.is_finite())
    }

    pub fn cast<U: Scalar>(&self) -> Tensor<U> {
        Tensor::from_parts(
            self.shape.clone(),
            self.values
                .iter()
                .map(|v| U::from_f64_lossy(v.to_f64_lossy()))
                .collect(),
        )
    }
}

/// A named trainable tensor with a lazily allocated gradient buffer.
#[derive(Clone, Debug, PartialEq)]
pub struct Parameter<T> {
    name: String,
    value: Tensor<T>,
    grad: Option<Tensor<T>>,
}

impl<T: Scalar> Parameter<T> {
    pub fn new(name: impl Into<String>, value: Tensor<T>) -> Self {
        Parameter {
            name: name.into(),
            value,
            grad: None,
        }
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn value(&self) -> &Tensor<T> {
        &self.value
    }

    pub fn value_mut(&mut self) -> &mut Tensor<T> {
        &mut self.value
    }

    pub fn grad(&self) -> Option<&Tensor<T>> {
        self.grad.as_ref()
    }

    pub fn grad_mut(&mut self) -> Option<&mut Tensor<T>> {
        self.grad.as_mut()
    }

    /// Adds `g` into the gradient buffer, allocating it on first use.
    pub fn accumulate_grad(&mut self, g: &[T]) -> Result<()> {
        if g.len() != self.value.len() {
            return Err(Error::Dimension {
                op: "accumulate_grad",
                shapes: vec![self.value.shape.clone(), vec![g.len()]],
            });
        }
        let shape = &self.value.shape;
        let buf = self.grad.get_or_insert_with(|| Tensor::zeros(shape));
        for (a, b) in buf.values.iter_mut().zip(g) {
            *a += *b;
        }
        Ok(())
    }

    pub fn zero_grad(&mut self) {
        self.grad = None;
    }

    /// Removes and returns the gradient buffer.
    pub fn take_grad(&mut self) -> Option<Tensor<T>> {
        self.grad.take()
    }

    pub fn len(&self) -> usize {
        self.value.len()
    }

    pub fn is_empty(&self) -> bool {
        self.value.is_empty()
    }
}
