//! Dense tensors and reverse-mode differentiation.
//!
//! [`Tensor`] is a shape + flat row-major buffer, generic over the element
//! type through [`Real`] so the same code runs in `f32` (training,
//! checkpoints) and `f64` (gradient checks, numerical oracles). The op set in
//! [`tape`] is exactly what the model needs — nothing speculative.

pub mod grad_check;
pub mod kernels;
pub mod tape;

pub use grad_check::{grad_check, GradCheck};
pub use tape::{Gradients, NodeId, Tape};

use serde::{Deserialize, Serialize};

/// Floating-point element type: `f32` or `f64`.
pub trait Real:
    num_traits::Float
    + num_traits::NumAssignOps
    + std::iter::Sum
    + std::fmt::Debug
    + std::fmt::Display
    + Send
    + Sync
    + 'static
{
    fn from_f64(v: f64) -> Self;
    /// Named to avoid clashing with `num_traits::ToPrimitive::to_f64`.
    fn as_f64(self) -> f64;
}

impl Real for f32 {
    fn from_f64(v: f64) -> Self {
        v as f32
    }
    fn as_f64(self) -> f64 {
        self as f64
    }
}

impl Real for f64 {
    fn from_f64(v: f64) -> Self {
        v
    }
    fn as_f64(self) -> f64 {
        self
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum TensorError {
    /// Two operand shapes that were required to agree (or compose) did not.
    #[error("{op}: shape mismatch {left:?} vs {right:?}")]
    ShapeMismatch {
        op: &'static str,
        left: Vec<usize>,
        right: Vec<usize>,
    },
    #[error("{op}: {msg}")]
    Invalid { op: &'static str, msg: String },
}

impl TensorError {
    pub(crate) fn invalid(op: &'static str, msg: impl Into<String>) -> Self {
        TensorError::Invalid { op, msg: msg.into() }
    }
}

/// Dense row-major tensor. A scalar has shape `[]` and one element.
///
/// Feature maps use HWC layout (`[height, width, channels]`), matrices are
/// `[rows, cols]`, vectors `[n]`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Tensor<F> {
    shape: Vec<usize>,
    data: Vec<F>,
}

impl<F: Real> Tensor<F> {
    pub fn new(shape: impl Into<Vec<usize>>, data: Vec<F>) -> Result<Self, TensorError> {
        let shape = shape.into();
        let expected: usize = shape.iter().product();
        if expected != data.len() {
            return Err(TensorError::invalid(
                "Tensor::new",
                format!("shape {:?} wants {} elements, got {}", shape, expected, data.len()),
            ));
        }
        Ok(Tensor { shape, data })
    }

    pub fn zeros(shape: impl Into<Vec<usize>>) -> Self {
        let shape = shape.into();
        let n = shape.iter().product();
        Tensor { shape, data: vec![F::zero(); n] }
    }

    pub fn filled(shape: impl Into<Vec<usize>>, value: F) -> Self {
        let shape = shape.into();
        let n = shape.iter().product();
        Tensor { shape, data: vec![value; n] }
    }

    /// Builds a tensor by calling `f` with each flat (row-major) index.
    pub fn from_fn(shape: impl Into<Vec<usize>>, mut f: impl FnMut(usize) -> F) -> Self {
        let shape = shape.into();
        let n = shape.iter().product();
        Tensor { shape, data: (0..n).map(&mut f).collect() }
    }

    pub fn scalar(value: F) -> Self {
        Tensor { shape: vec![], data: vec![value] }
    }

    pub fn shape(&self) -> &[usize] {
        &self.shape
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn data(&self) -> &[F] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [F] {
        &mut self.data
    }

    pub fn into_data(self) -> Vec<F> {
        self.data
    }

    /// Same data, new shape; the element count must match.
    pub fn reshaped(mut self, shape: impl Into<Vec<usize>>) -> Result<Self, TensorError> {
        let shape = shape.into();
        let expected: usize = shape.iter().product();
        if expected != self.data.len() {
            return Err(TensorError::ShapeMismatch {
                op: "reshape",
                left: self.shape.clone(),
                right: shape,
            });
        }
        self.shape = shape;
        Ok(self)
    }

    /// Element by multi-index; intended for tests, not hot loops.
    pub fn at(&self, index: &[usize]) -> F {
        assert_eq!(index.len(), self.shape.len(), "index rank mismatch");
        let mut flat = 0;
        for (i, (&ix, &dim)) in index.iter().zip(&self.shape).enumerate() {
            assert!(ix < dim, "index {ix} out of bounds for axis {i} (len {dim})");
            flat = flat * dim + ix;
        }
        self.data[flat]
    }

    /// Lossless precision change (`f32` → `f64`) or narrowing (`f64` → `f32`).
    pub fn cast<G: Real>(&self) -> Tensor<G> {
        Tensor {
            shape: self.shape.clone(),
            data: self.data.iter().map(|&v| G::from_f64(v.as_f64())).collect(),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn new_validates_element_count() {
        assert!(Tensor::<f64>::new(vec![2, 3], vec![0.0; 6]).is_ok());
        let err = Tensor::<f64>::new(vec![2, 3], vec![0.0; 5]).unwrap_err();
        assert!(matches!(err, TensorError::Invalid { .. }));
    }

    #[test]
    fn scalars_have_empty_shape_and_one_element() {
        let s = Tensor::scalar(4.5f64);
        assert_eq!(s.shape(), &[] as &[usize]);
        assert_eq!(s.len(), 1);
    }

    #[test]
    fn multi_indexing_is_row_major() {
        let t = Tensor::<f64>::from_fn(vec![2, 3, 4], |i| i as f64);
        assert_eq!(t.at(&[0, 0, 0]), 0.0);
        assert_eq!(t.at(&[0, 1, 0]), 4.0);
        assert_eq!(t.at(&[1, 0, 0]), 12.0);
        assert_eq!(t.at(&[1, 2, 3]), 23.0);
    }

    #[test]
    fn reshape_keeps_data_and_rejects_bad_counts() {
        let t = Tensor::<f32>::from_fn(vec![4, 3], |i| i as f32);
        let r = t.clone().reshaped(vec![2, 6]).unwrap();
        assert_eq!(r.data(), t.data());
        assert!(matches!(
            t.reshaped(vec![5, 3]),
            Err(TensorError::ShapeMismatch { .. })
        ));
    }
}
