use rand::Rng;

use super::geometry::{self, space, time};
use super::linear::glorot;
use super::params::{Curv, ParamId, ParamKind, ParamStore, Session};
use crate::autodiff::Var;
use crate::error::{Error, Result};
use crate::tensor::Tensor;

/// Smallest admissible hyperplane direction norm.
const MIN_DIRECTION: f64 = 1e-12;

/// Multinomial logistic regression whose logits are signed distances to
/// hyperplanes with normals `(sinh(sqrt(c) a) |z|, cosh(sqrt(c) a) z)`.
#[derive(Clone, Debug)]
pub struct LorentzMlr {
    pub z: ParamId,
    pub a: ParamId,
    pub classes: usize,
    pub dim: usize,
    pub curv: Curv,
}

impl LorentzMlr {
    pub fn new<R: Rng + ?Sized>(
        store: &mut ParamStore,
        name: &str,
        dim: usize,
        classes: usize,
        curv: Curv,
        rng: &mut R,
    ) -> Result<Self> {
        if classes == 0 || dim == 0 {
            return Err(Error::invalid("mlr needs at least one class and dimension"));
        }
        let z = store.add(
            format!("{name}.z"),
            glorot(classes, dim, rng),
            ParamKind::Euclidean,
        )?;
        let a = store.add(
            format!("{name}.a"),
            Tensor::zeros(&[classes]),
            ParamKind::Euclidean,
        )?;
        Ok(Self {
            z,
            a,
            classes,
            dim,
            curv,
        })
    }

    /// Logits `[..., classes]` for points `[..., dim + 1]`.
    pub fn forward<'t>(&self, s: &Session<'t>, x: Var<'t>) -> Result<Var<'t>> {
        mlr_logits(x, s.param(self.z), s.param(self.a), s.c(self.curv)?)
    }

    pub fn params(&self) -> Vec<ParamId> {
        vec![self.z, self.a]
    }
}

/// Functional form of [`LorentzMlr::forward`]; `z` is `[classes, n]`, `a` is `[classes]`.
pub fn mlr_logits<'t>(x: Var<'t>, z: Var<'t>, a: Var<'t>, c: Var<'t>) -> Result<Var<'t>> {
    let shape = x.shape();
    let n = z.shape()[1];
    if shape.last() != Some(&(n + 1)) {
        return Err(Error::shape(
            "lorentz_mlr",
            format!("points {shape:?} for {n}-dim directions"),
        ));
    }
    let znorm = z.square()?.sum_axis(1, false)?.sqrt()?;
    if znorm.value().data().iter().any(|&v| v < MIN_DIRECTION) {
        return Err(Error::domain(
            "lorentz_mlr",
            "hyperplane direction has zero norm",
        ));
    }
    let rows = x.value().num_rows();
    let flat = x.reshape(&[rows, n + 1])?;
    let sqrt_c = c.sqrt()?;
    let shift = a.mul(sqrt_c)?;
    let zx = space(flat)?.matmul_nt(z)?.div(znorm)?;
    let alpha = shift
        .cosh()?
        .mul(zx)?
        .sub(shift.sinh()?.mul(time(flat)?)?)?;
    let logits = alpha.mul(sqrt_c)?.asinh()?.div(sqrt_c)?;
    let mut out_shape = shape;
    *out_shape.last_mut().expect("non-empty") = z.shape()[0];
    logits.reshape(&out_shape)
}

/// Uniform centroid over the sequence axis: `[batch, len, n+1] -> [batch, n+1]`.
pub fn centroid_pool<'t>(x: Var<'t>, c: Var<'t>) -> Result<Var<'t>> {
    let shape = x.shape();
    if shape.len() != 3 || shape[1] == 0 {
        return Err(Error::shape("centroid_pool", format!("sequence {shape:?}")));
    }
    geometry::mean_centroid(x, 1, c)
}
