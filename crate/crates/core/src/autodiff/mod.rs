//! Tape-based reverse-mode differentiation over [`Tensor`]s.
//!
//! A [`Tape`] records every operation applied to its [`Var`]s in execution
//! order. [`Tape::backward`] walks the record once in reverse, after which the
//! tape is consumed: gradients stay readable but nothing new can be recorded.
//!
//! ```
//! use hypkit::autodiff::Tape;
//! use hypkit::Tensor;
//!
//! let tape = Tape::new();
//! let x = tape.var(Tensor::from_vec(vec![1.0, -2.0]));
//! let loss = x.mul(x).unwrap().sum().unwrap();
//! tape.backward(loss).unwrap();
//! assert_eq!(x.grad().unwrap().data(), &[2.0, -4.0]);
//! ```

mod elementwise;
mod gradcheck;
mod linalg;
mod reduce;
mod shape;

pub use gradcheck::{gradcheck, gradcheck_many, GradReport, REL_ERR_FLOOR};
pub use linalg::SparseMatrix;

use std::cell::RefCell;
use std::fmt;

use crate::error::{Error, Result};
use crate::tensor::Tensor;

/// Maps the output gradient to one optional gradient per parent.
type Backward = Box<dyn FnOnce(&Tensor) -> Result<Vec<Option<Tensor>>>>;

struct Node {
    op: &'static str,
    value: Tensor,
    requires_grad: bool,
    parents: Vec<usize>,
    backward: Option<Backward>,
}

#[derive(Default)]
struct Inner {
    nodes: Vec<Node>,
    grads: Vec<Option<Tensor>>,
    consumed: bool,
}

/// Recording of a single forward pass. Single-use and confined to one thread.
#[derive(Default)]
pub struct Tape {
    inner: RefCell<Inner>,
}

/// Handle to a value recorded on a [`Tape`].
#[derive(Clone, Copy)]
pub struct Var<'t> {
    tape: &'t Tape,
    id: usize,
}

impl fmt::Debug for Var<'_> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Var#{} {:?}", self.id, self.value())
    }
}

impl Tape {
    pub fn new() -> Self {
        Self::default()
    }

    /// Leaf that receives a gradient.
    pub fn var(&self, value: Tensor) -> Var<'_> {
        self.leaf(value, true)
    }

    /// Leaf treated as a constant.
    pub fn constant(&self, value: Tensor) -> Var<'_> {
        self.leaf(value, false)
    }

    pub fn scalar(&self, value: f64) -> Var<'_> {
        self.constant(Tensor::scalar(value))
    }

    fn leaf(&self, value: Tensor, requires_grad: bool) -> Var<'_> {
        let mut inner = self.inner.borrow_mut();
        let id = inner.nodes.len();
        inner.nodes.push(Node {
            op: "leaf",
            value,
            requires_grad,
            parents: Vec::new(),
            backward: None,
        });
        Var { tape: self, id }
    }

    pub fn len(&self) -> usize {
        self.inner.borrow().nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn is_consumed(&self) -> bool {
        self.inner.borrow().consumed
    }

    /// Records the result of an operation. `backward` is dropped when no
    /// parent needs a gradient.
    pub(crate) fn record(
        &self,
        op: &'static str,
        value: Tensor,
        parents: &[Var<'_>],
        backward: Backward,
    ) -> Result<Var<'_>> {
        if value.has_nan() {
            return Err(Error::NonFinite { op });
        }
        let mut inner = self.inner.borrow_mut();
        if inner.consumed {
            return Err(Error::Tape(format!("{op} recorded on a consumed tape")));
        }
        let requires_grad = parents.iter().any(|p| inner.nodes[p.id].requires_grad);
        let id = inner.nodes.len();
        inner.nodes.push(Node {
            op,
            value,
            requires_grad,
            parents: parents.iter().map(|p| p.id).collect(),
            backward: requires_grad.then_some(backward),
        });
        Ok(Var { tape: self, id })
    }

    /// Reverse accumulation from a scalar `loss`. Consumes the tape.
    pub fn backward(&self, loss: Var<'_>) -> Result<()> {
        let mut inner = self.inner.borrow_mut();
        if inner.consumed {
            return Err(Error::Tape("backward called on a consumed tape".into()));
        }
        let loss_shape = inner.nodes[loss.id].value.shape().to_vec();
        if loss_shape.iter().product::<usize>() != 1 {
            return Err(Error::Tape(format!(
                "backward needs a scalar loss, got shape {loss_shape:?}"
            )));
        }
        inner.consumed = true;
        let n = inner.nodes.len();
        let mut grads: Vec<Option<Tensor>> = vec![None; n];
        grads[loss.id] = Some(Tensor::full(&loss_shape, 1.0));
        for id in (0..=loss.id).rev() {
            let Some(g) = grads[id].clone() else { continue };
            let node = &mut inner.nodes[id];
            let Some(backward) = node.backward.take() else {
                continue;
            };
            let parents = node.parents.clone();
            let op = node.op;
            let parent_grads = backward(&g)?;
            for (&p, pg) in parents.iter().zip(parent_grads) {
                let Some(pg) = pg else { continue };
                if pg.has_nan() {
                    return Err(Error::NonFinite { op });
                }
                if !inner.nodes[p].requires_grad {
                    continue;
                }
                if pg.shape() != inner.nodes[p].value.shape() {
                    return Err(Error::Tape(format!(
                        "gradient shape {:?} does not match value shape {:?}",
                        pg.shape(),
                        inner.nodes[p].value.shape()
                    )));
                }
                grads[p] = Some(match grads[p].take() {
                    Some(acc) => acc.add(&pg)?,
                    None => pg,
                });
            }
        }
        for (node, g) in inner.nodes.iter_mut().zip(grads.iter_mut()) {
            node.backward = None;
            if !node.requires_grad {
                *g = None;
            }
        }
        inner.grads = grads;
        Ok(())
    }
}

impl<'t> Var<'t> {
    pub fn tape(&self) -> &'t Tape {
        self.tape
    }

    pub fn id(&self) -> usize {
        self.id
    }

    pub fn value(&self) -> Tensor {
        self.tape.inner.borrow().nodes[self.id].value.clone()
    }

    pub fn shape(&self) -> Vec<usize> {
        self.tape.inner.borrow().nodes[self.id]
            .value
            .shape()
            .to_vec()
    }

    pub fn requires_grad(&self) -> bool {
        self.tape.inner.borrow().nodes[self.id].requires_grad
    }

    /// Gradient after [`Tape::backward`]; `None` before backward or when the
    /// loss does not depend on this value.
    pub fn grad(&self) -> Option<Tensor> {
        self.tape
            .inner
            .borrow()
            .grads
            .get(self.id)
            .cloned()
            .flatten()
    }

    /// Gradient, or zeros when the loss does not depend on this value.
    pub fn grad_or_zeros(&self) -> Tensor {
        self.grad().unwrap_or_else(|| Tensor::zeros(&self.shape()))
    }

    pub(crate) fn same_tape(&self, other: &Var<'_>) -> Result<()> {
        if std::ptr::eq(self.tape, other.tape) {
            Ok(())
        } else {
            Err(Error::Tape("operands belong to different tapes".into()))
        }
    }
}
