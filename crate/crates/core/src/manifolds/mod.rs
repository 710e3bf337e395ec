//! Geometric kernel for the Lorentz hyperboloid and the Poincare ball.
//!
//! All math runs in `f64` on batched [`Tensor`]s whose trailing axis holds the
//! coordinates of one point or tangent vector. These are plain functions of
//! their inputs; the differentiable counterparts used by layers live in
//! [`crate::nn::geometry`].

mod convert;
mod curvature;
pub mod diagnostics;
mod entailment;
mod lorentz;
mod poincare;
mod point;
pub mod sample;
pub mod stable;

pub use convert::{to_lorentz, to_poincare};
pub use curvature::Curvature;
pub use entailment::{exterior_angle, half_aperture, DEFAULT_CONE_GAMMA};
pub use lorentz::{minkowski_dot, Lorentz};
pub use poincare::{Poincare, BALL_EPS};
pub use point::{ManifoldPoint, Model, TangentVector};

use crate::error::{Error, Result};
use crate::tensor::Tensor;

/// Row pairing for batched kernels: every operand has the same trailing size
/// and either one row (broadcast) or the common row count.
pub(crate) struct Rows {
    pub rows: usize,
    pub dim: usize,
    pub batch: Vec<usize>,
}

impl Rows {
    pub fn of(op: &'static str, operands: &[&Tensor]) -> Result<Self> {
        let dim = operands[0].last_dim();
        let mut widest = operands[0];
        for t in operands {
            if t.ndim() == 0 || t.last_dim() != dim {
                return Err(Error::shape(
                    op,
                    format!(
                        "trailing dims differ: {:?} vs {:?}",
                        operands[0].shape(),
                        t.shape()
                    ),
                ));
            }
            if t.num_rows() > widest.num_rows() {
                widest = t;
            }
        }
        let rows = widest.num_rows();
        for t in operands {
            let r = t.num_rows();
            if r != 1 && (r != rows || t.batch_shape() != widest.batch_shape()) {
                return Err(Error::shape(
                    op,
                    format!(
                        "batch shapes differ: {:?} vs {:?}",
                        t.shape(),
                        widest.shape()
                    ),
                ));
            }
        }
        Ok(Self {
            rows,
            dim,
            batch: widest.batch_shape().to_vec(),
        })
    }

    #[inline]
    pub fn get<'a>(&self, t: &'a Tensor, i: usize) -> &'a [f64] {
        if t.num_rows() == 1 {
            t.row(0)
        } else {
            t.row(i)
        }
    }

    pub fn out_shape(&self) -> Vec<usize> {
        let mut s = self.batch.clone();
        s.push(self.dim);
        s
    }
}

#[inline]
pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

#[inline]
pub(crate) fn norm_sq(a: &[f64]) -> f64 {
    dot(a, a)
}
