//! Differentiable counterparts of the manifold kernel.
//!
//! Curvature enters every function as `c = -K`, a scalar [`Var`] so that
//! learnable curvatures receive gradients. Functions here do not validate
//! membership: gradient checks perturb points off the manifold and the
//! formulas are smooth extensions into the ambient space. Inner products
//! keep the trailing axis with length 1 so they broadcast against points.

use crate::autodiff::Var;
use crate::error::{Error, Result};
use crate::manifolds::DEFAULT_CONE_GAMMA;
use crate::tensor::Tensor;

/// Floor for squared chord lengths fed to square roots.
const MIN_CHORD: f64 = 1e-24;
/// Keeps `acos`/`asin` arguments away from their infinite-slope endpoints.
const ANGLE_EPS: f64 = 1e-7;

fn last(v: &Var<'_>) -> Result<usize> {
    let nd = v.shape().len();
    if nd == 0 {
        return Err(Error::shape("geometry", "scalar input"));
    }
    Ok(nd - 1)
}

fn metric_sign(dim: usize) -> Tensor {
    Tensor::from_fn(&[dim], |i| if i == 0 { -1.0 } else { 1.0 })
}

/// Multiplies the time coordinate by -1.
pub fn flip_time<'t>(x: Var<'t>) -> Result<Var<'t>> {
    let dim = x.shape()[last(&x)?];
    x.mul(x.tape().constant(metric_sign(dim)))
}

/// Lorentzian inner product over the trailing axis, shape `[..., 1]`.
pub fn inner<'t>(x: Var<'t>, y: Var<'t>) -> Result<Var<'t>> {
    let ax = last(&x)?;
    flip_time(x)?.mul(y)?.sum_axis(ax, true)
}

/// Squared Euclidean norm over the trailing axis, shape `[..., 1]`.
pub fn sq_norm<'t>(u: Var<'t>) -> Result<Var<'t>> {
    let ax = last(&u)?;
    u.square()?.sum_axis(ax, true)
}

pub fn time<'t>(x: Var<'t>) -> Result<Var<'t>> {
    x.narrow_last(0, 1)
}

pub fn space<'t>(x: Var<'t>) -> Result<Var<'t>> {
    let n = x.shape()[last(&x)?];
    x.narrow_last(1, n)
}

/// `[sqrt(|u|^2 + 1/c), u]`.
pub fn lift<'t>(u: Var<'t>, c: Var<'t>) -> Result<Var<'t>> {
    let ax = last(&u)?;
    let t = sq_norm(u)?.add(c.recip()?)?.sqrt()?;
    u.tape().concat(&[t, u], ax)
}

/// Rescales a future time-like vector onto the hyperboloid.
pub fn project<'t>(z: Var<'t>, c: Var<'t>) -> Result<Var<'t>> {
    let neg_sq = inner(z, z)?.neg()?;
    let zt = time(z)?.value();
    if neg_sq.value().data().iter().any(|&v| v <= 0.0) || zt.data().iter().any(|&v| v <= 0.0) {
        return Err(Error::domain(
            "project",
            "input is not a future time-like vector",
        ));
    }
    z.div(neg_sq.mul(c)?.sqrt()?)
}

/// Weighted centroid: `weights` `[..., q, m]` over `points` `[..., m, n+1]`.
pub fn centroid<'t>(points: Var<'t>, weights: Var<'t>, c: Var<'t>) -> Result<Var<'t>> {
    project(weights.matmul(points)?, c)
}

/// Uniformly weighted centroid over `axis`.
pub fn mean_centroid<'t>(points: Var<'t>, axis: usize, c: Var<'t>) -> Result<Var<'t>> {
    project(points.mean_axis(axis, false)?, c)
}

pub fn expmap<'t>(x: Var<'t>, v: Var<'t>, c: Var<'t>) -> Result<Var<'t>> {
    let a2 = inner(v, v)?.mul(c)?.clamp(0.0, f64::INFINITY)?;
    a2.cosh_sqrt()?.mul(x)?.add(a2.sinhc_sqrt()?.mul(v)?)
}

/// Exponential map at the origin of a space vector `u` (the tangent `(0, u)`).
pub fn expmap0<'t>(u: Var<'t>, c: Var<'t>) -> Result<Var<'t>> {
    let coef = sq_norm(u)?.mul(c)?.sinhc_sqrt()?;
    lift(coef.mul(u)?, c)
}

/// Logarithmic map at the origin, returned as the space vector of `(0, u)`.
pub fn logmap0<'t>(x: Var<'t>, c: Var<'t>) -> Result<Var<'t>> {
    let xs = space(x)?;
    sq_norm(xs)?.mul(c)?.asinhc_sqrt()?.mul(xs)
}

/// `c/2 * <y - x, y - x>_L`, which equals `-c<x,y> - 1` on the manifold.
fn half_chord<'t>(x: Var<'t>, y: Var<'t>, c: Var<'t>) -> Result<Var<'t>> {
    let d = y.sub(x)?;
    inner(d, d)?.mul(c)?.scale(0.5)?.clamp(0.0, f64::INFINITY)
}

pub fn logmap<'t>(x: Var<'t>, y: Var<'t>, c: Var<'t>) -> Result<Var<'t>> {
    let q = half_chord(x, y, c)?;
    let beta = q.add_scalar(1.0)?;
    let coef = q.mul(q.add_scalar(2.0)?)?.asinhc_sqrt()?;
    coef.mul(y.sub(beta.mul(x)?)?)
}

/// Squared geodesic distance, shape `[..., 1]`; smooth at `x = y`.
pub fn dist_sq<'t>(x: Var<'t>, y: Var<'t>, c: Var<'t>) -> Result<Var<'t>> {
    // d = (2/sqrt c) asinh(sqrt q) with q = c|x - y|_L^2 / 4
    let q = half_chord(x, y, c)?.scale(0.5)?;
    let f = q.asinhc_sqrt()?;
    q.mul(f.square()?)?.scale(4.0)?.div(c)
}

/// Geodesic distance, shape `[..., 1]`.
pub fn dist<'t>(x: Var<'t>, y: Var<'t>, c: Var<'t>) -> Result<Var<'t>> {
    let q = half_chord(x, y, c)?
        .scale(0.5)?
        .clamp(MIN_CHORD, f64::INFINITY)?;
    let asinh = q.sqrt()?.mul(q.asinhc_sqrt()?)?;
    asinh.scale(2.0)?.div(c.sqrt()?)
}

/// Parallel transport of the origin tangent `(0, u)` to `x`.
pub fn ptransp0<'t>(x: Var<'t>, u: Var<'t>, c: Var<'t>) -> Result<Var<'t>> {
    let ax = last(&x)?;
    let (xt, xs) = (time(x)?, space(x)?);
    let sqrt_c = c.sqrt()?;
    let xu = xs.mul(u)?.sum_axis(ax, true)?;
    let out_t = xu.mul(sqrt_c)?;
    let denom = xt.add(sqrt_c.recip()?)?;
    let out_s = u.add(xu.mul(sqrt_c)?.div(denom)?.mul(xs)?)?;
    x.tape().concat(&[out_t, out_s], ax)
}

/// Residual by transport: `exp_x(P_{o->x}(log_o(y)))`.
pub fn residual_ptransp<'t>(x: Var<'t>, y: Var<'t>, c: Var<'t>) -> Result<Var<'t>> {
    let u = logmap0(y, c)?;
    expmap(x, ptransp0(x, u, c)?, c)
}

/// Half-aperture of the entailment cone at `x`.
pub fn half_aperture<'t>(x: Var<'t>, gamma: f64, c: Var<'t>) -> Result<Var<'t>> {
    let norm = sq_norm(space(x)?)?
        .clamp(MIN_CHORD, f64::INFINITY)?
        .sqrt()?;
    let ratio = norm.mul(c.sqrt()?)?.recip()?.scale(2.0 * gamma)?;
    ratio.clamp(0.0, 1.0 - ANGLE_EPS)?.asin()
}

/// Angle at `x` between the ray from the origin and the geodesic towards `y`.
pub fn exterior_angle<'t>(x: Var<'t>, y: Var<'t>, c: Var<'t>) -> Result<Var<'t>> {
    let cip = inner(x, y)?.mul(c)?;
    let num = time(y)?.add(time(x)?.mul(cip)?)?;
    let xs_norm = sq_norm(space(x)?)?
        .clamp(MIN_CHORD, f64::INFINITY)?
        .sqrt()?;
    let root = cip
        .square()?
        .add_scalar(-1.0)?
        .clamp(MIN_CHORD, f64::INFINITY)?
        .sqrt()?;
    num.div(xs_norm.mul(root)?)?
        .clamp(-1.0 + ANGLE_EPS, 1.0 - ANGLE_EPS)?
        .acos()
}

/// Default cone width used by entailment losses.
pub const CONE_GAMMA: f64 = DEFAULT_CONE_GAMMA;

/// Poincare ball operations.
pub mod ball {
    use super::{last, sq_norm, MIN_CHORD};
    use crate::autodiff::Var;
    use crate::error::Result;

    fn dot<'t>(x: Var<'t>, y: Var<'t>) -> Result<Var<'t>> {
        let ax = last(&x)?;
        x.mul(y)?.sum_axis(ax, true)
    }

    /// Conformal factor `2 / (1 - c|x|^2)`, shape `[..., 1]`.
    pub fn lambda<'t>(x: Var<'t>, c: Var<'t>) -> Result<Var<'t>> {
        sq_norm(x)?
            .mul(c)?
            .neg()?
            .add_scalar(1.0)?
            .recip()?
            .scale(2.0)
    }

    pub fn mobius_add<'t>(x: Var<'t>, y: Var<'t>, c: Var<'t>) -> Result<Var<'t>> {
        let xy = dot(x, y)?.mul(c)?.scale(2.0)?;
        let x2 = sq_norm(x)?.mul(c)?;
        let y2 = sq_norm(y)?.mul(c)?;
        let a = xy.add(y2)?.add_scalar(1.0)?;
        let b = x2.neg()?.add_scalar(1.0)?;
        let den = xy.add(x2.mul(y2)?)?.add_scalar(1.0)?;
        a.mul(x)?.add(b.mul(y)?)?.div(den)
    }

    pub fn expmap0<'t>(u: Var<'t>, c: Var<'t>) -> Result<Var<'t>> {
        sq_norm(u)?.mul(c)?.tanhc_sqrt()?.mul(u)
    }

    pub fn logmap0<'t>(y: Var<'t>, c: Var<'t>) -> Result<Var<'t>> {
        sq_norm(y)?.mul(c)?.atanhc_sqrt()?.mul(y)
    }

    pub fn expmap<'t>(x: Var<'t>, v: Var<'t>, c: Var<'t>) -> Result<Var<'t>> {
        let lam = lambda(x, c)?;
        // tanh(sqrt(c) lam |v| / 2) / (sqrt(c) |v|) = (lam/2) tanhc(c lam^2 |v|^2 / 4)
        let s = lam.square()?.mul(sq_norm(v)?)?.mul(c)?.scale(0.25)?;
        let step = s.tanhc_sqrt()?.mul(lam)?.scale(0.5)?.mul(v)?;
        mobius_add(x, step, c)
    }

    pub fn logmap<'t>(x: Var<'t>, y: Var<'t>, c: Var<'t>) -> Result<Var<'t>> {
        let m = mobius_add(x.neg()?, y, c)?;
        let coef = sq_norm(m)?
            .mul(c)?
            .atanhc_sqrt()?
            .scale(2.0)?
            .div(lambda(x, c)?)?;
        coef.mul(m)
    }

    /// Geodesic distance, shape `[..., 1]`.
    pub fn dist<'t>(x: Var<'t>, y: Var<'t>, c: Var<'t>) -> Result<Var<'t>> {
        let m = mobius_add(x.neg()?, y, c)?;
        let m2 = sq_norm(m)?;
        let norm = m2.clamp(MIN_CHORD, f64::INFINITY)?.sqrt()?;
        norm.mul(m2.mul(c)?.atanhc_sqrt()?)?.scale(2.0)
    }
}
