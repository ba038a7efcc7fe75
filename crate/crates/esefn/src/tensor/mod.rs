//! Dense rank-1..3 tensors of `f64` with reverse-mode automatic
//! differentiation.
//!
//! A [`Tensor`] is a cheaply clonable handle to shared storage. Leaf tensors
//! created with [`Tensor::with_grad`] own a persistent gradient buffer;
//! gradients accumulate there across [`Graph::backward`] calls until
//! [`Tensor::zero_grad`] resets them. Everything is `f64`: the tensors in
//! this crate are small enough that precision is cheaper than speed, and it
//! lets the finite-difference checks run at tight tolerances.

mod gradcheck;
mod graph;
mod ops;

pub use gradcheck::{finite_diff_grad, max_rel_error};
pub use graph::Graph;
pub use ops::Selected;

use std::cell::{Ref, RefCell};
use std::rc::Rc;
use std::sync::atomic::{AtomicU64, Ordering};

use crate::error::{shape_str, Error, Result};

pub(crate) const MAX_RANK: usize = 3;

static NEXT_ID: AtomicU64 = AtomicU64::new(0);

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub(crate) struct TensorId(u64);

fn fresh_id() -> TensorId {
    TensorId(NEXT_ID.fetch_add(1, Ordering::Relaxed))
}

struct TensorInner {
    id: TensorId,
    dims: Vec<usize>,
    data: RefCell<Vec<f64>>,
    /// Present iff the tensor tracks gradients.
    grad: Option<RefCell<Vec<f64>>>,
}

/// A dense real-valued tensor of rank 1 to 3, row-major.
///
/// Cloning copies the handle, not the storage; two clones refer to the same
/// values and gradient buffer.
#[derive(Clone)]
pub struct Tensor {
    inner: Rc<TensorInner>,
}

impl Tensor {
    /// Builds a tensor from explicit dims and row-major data.
    ///
    /// Rejects rank 0 or > 3, zero extents, length mismatches, and
    /// non-finite values.
    pub fn from_vec(dims: &[usize], data: Vec<f64>) -> Result<Tensor> {
        if dims.is_empty() || dims.len() > MAX_RANK {
            return Err(Error::Dimension {
                op: "tensor",
                detail: format!("rank must be 1..={MAX_RANK}, got dims {}", shape_str(dims)),
            });
        }
        if dims.iter().any(|&d| d == 0) {
            return Err(Error::Dimension {
                op: "tensor",
                detail: format!("extents must be positive, got dims {}", shape_str(dims)),
            });
        }
        let expect: usize = dims.iter().product();
        if expect != data.len() {
            return Err(Error::Dimension {
                op: "tensor",
                detail: format!(
                    "dims {} imply {expect} values, got {}",
                    shape_str(dims),
                    data.len()
                ),
            });
        }
        if !data.iter().all(|v| v.is_finite()) {
            return Err(Error::NonFinite {
                op: "tensor construction".to_string(),
            });
        }
        Ok(Self::new_unchecked(dims.to_vec(), data))
    }

    /// All-zero tensor of the given dims.
    pub fn zeros(dims: &[usize]) -> Result<Tensor> {
        let len: usize = dims.iter().product();
        Tensor::from_vec(dims, vec![0.0; len])
    }

    /// Rank-1 tensor of length 1 holding a single value.
    pub fn scalar(v: f64) -> Result<Tensor> {
        Tensor::from_vec(&[1], vec![v])
    }

    /// Skips validation; callers guarantee dims/data consistency.
    pub(crate) fn new_unchecked(dims: Vec<usize>, data: Vec<f64>) -> Tensor {
        debug_assert_eq!(dims.iter().product::<usize>(), data.len());
        Tensor {
            inner: Rc::new(TensorInner {
                id: fresh_id(),
                dims,
                data: RefCell::new(data),
                grad: None,
            }),
        }
    }

    /// Turns this tensor into a gradient-tracking leaf with a zeroed
    /// gradient buffer.
    ///
    /// Call at creation time: the returned tensor has a fresh identity, so
    /// conversion after the tensor entered a graph would orphan it there.
    pub fn with_grad(self) -> Tensor {
        let data = self.inner.data.borrow().clone();
        let len = data.len();
        Tensor {
            inner: Rc::new(TensorInner {
                id: fresh_id(),
                dims: self.inner.dims.clone(),
                data: RefCell::new(data),
                grad: Some(RefCell::new(vec![0.0; len])),
            }),
        }
    }

    pub fn dims(&self) -> &[usize] {
        &self.inner.dims
    }

    pub fn rank(&self) -> usize {
        self.inner.dims.len()
    }

    /// Total element count.
    pub fn len(&self) -> usize {
        self.inner.data.borrow().len()
    }

    pub fn is_empty(&self) -> bool {
        false // zero extents are rejected at construction
    }

    /// Copy of the row-major values.
    pub fn values(&self) -> Vec<f64> {
        self.inner.data.borrow().clone()
    }

    /// The single value of a one-element tensor.
    pub fn item(&self) -> Result<f64> {
        let data = self.inner.data.borrow();
        if data.len() != 1 {
            return Err(Error::Usage(format!(
                "item() needs a one-element tensor, got dims {}",
                shape_str(self.dims())
            )));
        }
        Ok(data[0])
    }

    pub fn requires_grad(&self) -> bool {
        self.inner.grad.is_some()
    }

    /// Copy of the gradient buffer, if this tensor tracks gradients.
    pub fn grad(&self) -> Option<Vec<f64>> {
        self.inner.grad.as_ref().map(|g| g.borrow().clone())
    }

    /// Resets the gradient buffer to zero. No-op on untracked tensors.
    pub fn zero_grad(&self) {
        if let Some(g) = &self.inner.grad {
            g.borrow_mut().iter_mut().for_each(|v| *v = 0.0);
        }
    }

    /// Overwrites the values in place, keeping dims and identity.
    pub fn set_values(&self, values: &[f64]) -> Result<()> {
        if values.len() != self.len() {
            return Err(Error::Dimension {
                op: "set_values",
                detail: format!(
                    "tensor dims {} hold {} values, got {}",
                    shape_str(self.dims()),
                    self.len(),
                    values.len()
                ),
            });
        }
        if !values.iter().all(|v| v.is_finite()) {
            return Err(Error::NonFinite {
                op: "set_values".to_string(),
            });
        }
        self.inner.data.borrow_mut().copy_from_slice(values);
        Ok(())
    }

    pub(crate) fn id(&self) -> TensorId {
        self.inner.id
    }

    pub(crate) fn data_ref(&self) -> Ref<'_, Vec<f64>> {
        self.inner.data.borrow()
    }

    pub(crate) fn accumulate_grad(&self, delta: &[f64]) {
        if let Some(g) = &self.inner.grad {
            let mut g = g.borrow_mut();
            debug_assert_eq!(g.len(), delta.len());
            for (gi, di) in g.iter_mut().zip(delta) {
                *gi += di;
            }
        }
    }

    /// In-place update used by the optimizer and finite differencing.
    pub(crate) fn nudge(&self, index: usize, delta: f64) {
        self.inner.data.borrow_mut()[index] += delta;
    }
}

impl std::fmt::Debug for Tensor {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let data = self.inner.data.borrow();
        if data.len() <= 8 {
            write!(f, "Tensor(dims={:?}, data={:?})", self.inner.dims, *data)
        } else {
            write!(
                f,
                "Tensor(dims={:?}, data=[{}, ...; {}])",
                self.inner.dims,
                data[0],
                data.len()
            )
        }
    }
}
