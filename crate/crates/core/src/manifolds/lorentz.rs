//! Lorentz (hyperboloid) model `{x : <x,x>_L = 1/K, x_t > 0}`.
//!
//! Tensors carry points along the trailing axis: index 0 is the time-like
//! coordinate `x_t`, indices `1..=n` the space-like block `x_s`. Every
//! operation is batched over leading axes; binary operations accept either
//! equal shapes or a single row on one side.

use super::{diagnostics, stable, Curvature, Rows};
use crate::error::{Error, Result};
use crate::tensor::Tensor;

/// Tolerance (relative to `c * x_t^2`) used when validating inputs.
pub const INPUT_TOL: f64 = 1e-6;

/// Minkowski bilinear form `-x_t y_t + x_s . y_s` on raw rows.
#[inline]
pub fn minkowski_dot(x: &[f64], y: &[f64]) -> f64 {
    debug_assert_eq!(x.len(), y.len());
    let space: f64 = x[1..].iter().zip(&y[1..]).map(|(a, b)| a * b).sum();
    space - x[0] * y[0]
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Lorentz {
    k: f64,
}

impl Lorentz {
    pub fn new(k: f64) -> Result<Self> {
        Curvature::new(k)?;
        Ok(Self { k })
    }

    pub fn from_curvature(curvature: &Curvature) -> Self {
        Self {
            k: curvature.value(),
        }
    }

    pub fn k(&self) -> f64 {
        self.k
    }

    pub fn c(&self) -> f64 {
        -self.k
    }

    /// `sqrt(-1/K)`, the time coordinate of the origin.
    pub fn radius(&self) -> f64 {
        (-1.0 / self.k).sqrt()
    }

    pub fn origin(&self, n: usize) -> Tensor {
        let mut data = vec![0.0; n + 1];
        data[0] = self.radius();
        Tensor::from_vec(data)
    }

    /// Lorentzian inner product of paired rows; output drops the trailing axis.
    pub fn inner(x: &Tensor, y: &Tensor) -> Result<Tensor> {
        let p = Rows::of("lorentz_inner", &[x, y])?;
        let out = (0..p.rows)
            .map(|i| minkowski_dot(p.get(x, i), p.get(y, i)))
            .collect();
        Ok(Tensor::from_parts(p.batch, out))
    }

    /// Largest `|<x,x>_L - 1/K|` over rows, `inf` if any row sits on the lower sheet.
    pub fn membership_error(&self, x: &Tensor) -> f64 {
        let target = 1.0 / self.k;
        x.rows().fold(0.0_f64, |m, row| {
            if !(row[0] > 0.0) {
                return f64::INFINITY;
            }
            m.max((minkowski_dot(row, row) - target).abs())
        })
    }

    /// Validates that every row is a finite point of this manifold.
    pub fn check_point(&self, op: &'static str, x: &Tensor) -> Result<()> {
        let c = self.c();
        for (i, row) in x.rows().enumerate() {
            if row.len() < 2 {
                return Err(Error::shape(
                    op,
                    "Lorentz points need at least two coordinates",
                ));
            }
            if !row.iter().all(|v| v.is_finite()) {
                return Err(Error::NonFinite { op });
            }
            let err = (c * minkowski_dot(row, row) + 1.0).abs() / (c * row[0] * row[0]).max(1.0);
            if !(row[0] > 0.0) || err > INPUT_TOL {
                return Err(Error::OffManifold {
                    detail: format!("{op}: row {i} has relative membership error {err:e}"),
                });
            }
        }
        Ok(())
    }

    /// `exp_x(v) = cosh(a) x + sinh(a)/a v` with `a = sqrt(-K) |v|_L`.
    pub fn expmap(&self, x: &Tensor, v: &Tensor) -> Result<Tensor> {
        self.check_point("lorentz_expmap", x)?;
        if !v.all_finite() {
            return Err(Error::NonFinite {
                op: "lorentz_expmap",
            });
        }
        let p = Rows::of("lorentz_expmap", &[x, v])?;
        let sc = self.c().sqrt();
        let mut out = Vec::with_capacity(p.rows * p.dim);
        for i in 0..p.rows {
            let (xr, vr) = (p.get(x, i), p.get(v, i));
            let alpha = sc * minkowski_dot(vr, vr).max(0.0).sqrt();
            let (ch, shc) = (alpha.cosh(), stable::sinhc(alpha));
            out.extend(xr.iter().zip(vr).map(|(a, b)| ch * a + shc * b));
        }
        Ok(Tensor::from_parts(p.out_shape(), out))
    }

    /// `log_x(y)`; the inverse of [`expmap`](Self::expmap).
    pub fn logmap(&self, x: &Tensor, y: &Tensor) -> Result<Tensor> {
        self.check_point("lorentz_logmap", x)?;
        self.check_point("lorentz_logmap", y)?;
        let p = Rows::of("lorentz_logmap", &[x, y])?;
        let c = self.c();
        let mut out = Vec::with_capacity(p.rows * p.dim);
        let mut diff = vec![0.0; p.dim];
        for i in 0..p.rows {
            let (xr, yr) = (p.get(x, i), p.get(y, i));
            let beta = -c * minkowski_dot(xr, yr);
            if beta < 1.0 {
                diagnostics::report_acosh(1.0 - beta);
            }
            for ((d, a), b) in diff.iter_mut().zip(xr).zip(yr) {
                *d = b - a;
            }
            // beta - 1 from the chord avoids cancellation for nearby points
            let bm1 = (0.5 * c * minkowski_dot(&diff, &diff)).max(0.0);
            let coef = stable::acosh_ratio(1.0 + bm1);
            out.extend(diff.iter().zip(xr).map(|(d, a)| coef * (d - bm1 * a)));
        }
        Ok(Tensor::from_parts(p.out_shape(), out))
    }

    /// Geodesic distance `acosh(K <x,y>_L) / sqrt(-K)`.
    ///
    /// Evaluated as `2/sqrt(c) * asinh(sqrt(c q)/2)` with `q = <x-y, x-y>_L`,
    /// which is the same quantity on the manifold and exactly zero for `x = y`.
    pub fn dist(&self, x: &Tensor, y: &Tensor) -> Result<Tensor> {
        self.check_point("lorentz_dist", x)?;
        self.check_point("lorentz_dist", y)?;
        let p = Rows::of("lorentz_dist", &[x, y])?;
        let c = self.c();
        let sc = c.sqrt();
        let mut diff = vec![0.0; p.dim];
        let out = (0..p.rows)
            .map(|i| {
                for ((d, a), b) in diff.iter_mut().zip(p.get(x, i)).zip(p.get(y, i)) {
                    *d = b - a;
                }
                let q = minkowski_dot(&diff, &diff);
                if q < 0.0 {
                    diagnostics::report_acosh(-0.5 * c * q);
                }
                2.0 / sc * (0.5 * (c * q.max(0.0)).sqrt()).asinh()
            })
            .collect();
        Ok(Tensor::from_parts(p.batch, out))
    }

    /// Parallel transport of `v` from `T_x` to `T_y`.
    pub fn ptransp(&self, x: &Tensor, y: &Tensor, v: &Tensor) -> Result<Tensor> {
        self.check_point("lorentz_ptransp", x)?;
        self.check_point("lorentz_ptransp", y)?;
        let p = Rows::of("lorentz_ptransp", &[x, y, v])?;
        let inv_c = 1.0 / self.c();
        let mut out = Vec::with_capacity(p.rows * p.dim);
        for i in 0..p.rows {
            let (xr, yr, vr) = (p.get(x, i), p.get(y, i), p.get(v, i));
            let coef = minkowski_dot(yr, vr) / (inv_c - minkowski_dot(xr, yr));
            out.extend(
                vr.iter()
                    .zip(xr.iter().zip(yr))
                    .map(|(vv, (a, b))| vv + coef * (a + b)),
            );
        }
        Ok(Tensor::from_parts(p.out_shape(), out))
    }

    /// Normalizes a time-like vector on the upper sheet onto the hyperboloid.
    pub fn project(&self, z: &Tensor) -> Result<Tensor> {
        let sc = self.c().sqrt();
        let mut out = Vec::with_capacity(z.numel());
        for row in z.rows() {
            let q = minkowski_dot(row, row);
            if !(q < 0.0 && row[0] > 0.0) {
                return Err(Error::domain(
                    "lorentz_project",
                    format!(
                        "vector is not future time-like (<z,z>_L = {q:e}, z_t = {})",
                        row[0]
                    ),
                ));
            }
            let s = 1.0 / (sc * (-q).sqrt());
            out.extend(row.iter().map(|v| v * s));
        }
        Ok(Tensor::from_parts(z.shape().to_vec(), out))
    }

    /// Space-like lift `u -> [sqrt(|u|^2 - 1/K), u]`; trailing axis grows by one.
    pub fn lift(&self, u: &Tensor) -> Result<Tensor> {
        if u.ndim() == 0 {
            return Err(Error::shape("space_like_lift", "scalar input"));
        }
        if !u.all_finite() {
            return Err(Error::NonFinite {
                op: "space_like_lift",
            });
        }
        let inv_c = 1.0 / self.c();
        let n = u.last_dim();
        let mut out = Vec::with_capacity(u.num_rows() * (n + 1));
        for row in u.rows() {
            let sq: f64 = row.iter().map(|v| v * v).sum();
            out.push((sq + inv_c).sqrt());
            out.extend_from_slice(row);
        }
        let mut shape = u.shape().to_vec();
        *shape.last_mut().unwrap() = n + 1;
        Ok(Tensor::from_parts(shape, out))
    }

    /// Space-like block of each point.
    pub fn space(x: &Tensor) -> Result<Tensor> {
        x.slice_axis(x.ndim().saturating_sub(1), 1, x.last_dim())
    }

    /// Weighted centroid of `points` (`[m, ..., n+1]`) with weights `[m]`.
    pub fn centroid(&self, points: &Tensor, weights: &[f64]) -> Result<Tensor> {
        let m = *points
            .shape()
            .first()
            .ok_or_else(|| Error::shape("lorentz_centroid", "scalar input"))?;
        if weights.len() != m {
            return Err(Error::shape(
                "lorentz_centroid",
                format!("{} weights for {m} points", weights.len()),
            ));
        }
        if weights.iter().any(|w| !(*w >= 0.0)) {
            return Err(Error::invalid("centroid weights must be nonnegative"));
        }
        if weights.iter().sum::<f64>() <= 0.0 {
            return Err(Error::invalid("centroid weights sum to zero"));
        }
        self.check_point("lorentz_centroid", points)?;
        let block = points.numel() / m;
        let mut acc = vec![0.0; block];
        for (i, &w) in weights.iter().enumerate() {
            for (a, x) in acc
                .iter_mut()
                .zip(&points.data()[i * block..(i + 1) * block])
            {
                *a += w * x;
            }
        }
        self.project(&Tensor::from_parts(points.shape()[1..].to_vec(), acc))
    }

    /// Projects an ambient vector onto `T_x`: `u + c <x,u>_L x`.
    pub fn proju(&self, x: &Tensor, u: &Tensor) -> Result<Tensor> {
        let p = Rows::of("lorentz_proju", &[x, u])?;
        let c = self.c();
        let mut out = Vec::with_capacity(p.rows * p.dim);
        for i in 0..p.rows {
            let (xr, ur) = (p.get(x, i), p.get(u, i));
            let coef = c * minkowski_dot(xr, ur);
            out.extend(ur.iter().zip(xr).map(|(a, b)| a + coef * b));
        }
        Ok(Tensor::from_parts(p.out_shape(), out))
    }

    /// Riemannian gradient from an ambient Euclidean gradient: apply the inverse
    /// metric (negate the time coordinate), then project onto the tangent space.
    pub fn egrad2rgrad(&self, x: &Tensor, grad: &Tensor) -> Result<Tensor> {
        let d = grad.last_dim();
        let flipped = Tensor::from_fn(grad.shape(), |i| {
            let g = grad.data()[i];
            if i % d == 0 {
                -g
            } else {
                g
            }
        });
        self.proju(x, &flipped)
    }

    /// `exp_o` of space-only tangent vectors `[..., n]`.
    pub fn expmap0(&self, u: &Tensor) -> Result<Tensor> {
        let sc = self.c().sqrt();
        let r = self.radius();
        let n = u.last_dim();
        let mut out = Vec::with_capacity(u.num_rows() * (n + 1));
        for row in u.rows() {
            let norm = row.iter().map(|v| v * v).sum::<f64>().sqrt();
            let alpha = sc * norm;
            out.push(r * alpha.cosh());
            let s = stable::sinhc(alpha);
            out.extend(row.iter().map(|v| s * v));
        }
        let mut shape = u.shape().to_vec();
        *shape.last_mut().unwrap() = n + 1;
        Ok(Tensor::from_parts(shape, out))
    }

    /// Space block of `log_o(x)` (its time coordinate is identically zero).
    pub fn logmap0(&self, x: &Tensor) -> Result<Tensor> {
        self.check_point("lorentz_logmap0", x)?;
        let sc = self.c().sqrt();
        let n = x.last_dim() - 1;
        let mut out = Vec::with_capacity(x.num_rows() * n);
        for row in x.rows() {
            let space_norm = row[1..].iter().map(|v| v * v).sum::<f64>().sqrt();
            // distance to the origin, computed from the space block for accuracy
            let d = (sc * space_norm).asinh() / sc;
            let coef = if space_norm > 0.0 {
                d / space_norm
            } else {
                1.0
            };
            out.extend(row[1..].iter().map(|v| coef * v));
        }
        let mut shape = x.shape().to_vec();
        *shape.last_mut().unwrap() = n;
        Ok(Tensor::from_parts(shape, out))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn t(v: &[f64]) -> Tensor {
        Tensor::from_vec(v.to_vec())
    }

    #[test]
    fn inner_examples() {
        let m = Lorentz::new(-1.0).unwrap();
        let o = m.origin(2);
        assert_eq!(Lorentz::inner(&o, &o).unwrap().item().unwrap(), -1.0);
        let v = t(&[0.0, 0.3, -2.0]);
        assert_eq!(Lorentz::inner(&o, &v).unwrap().item().unwrap(), 0.0);
        let x = t(&[1f64.cosh(), 1f64.sinh()]);
        let got = Lorentz::inner(&x, &t(&[1.0, 0.0])).unwrap().item().unwrap();
        assert!((got + 1.543_080_634_815_243_7).abs() < 1e-15);
    }

    #[test]
    fn inner_rejects_mismatched_dims() {
        assert!(Lorentz::inner(&t(&[1.0, 0.0]), &t(&[1.0, 0.0, 0.0])).is_err());
    }

    #[test]
    fn expmap_examples() {
        let m = Lorentz::new(-1.0).unwrap();
        let o = m.origin(2);
        let zero = t(&[0.0, 0.0, 0.0]);
        assert_eq!(m.expmap(&o, &zero).unwrap(), o);
        for s in [1.0f64, 2.0] {
            let y = m.expmap(&o, &t(&[0.0, s, 0.0])).unwrap();
            assert!((y.data()[0] - s.cosh()).abs() < 1e-14);
            assert!((y.data()[1] - s.sinh()).abs() < 1e-14);
            assert_eq!(y.data()[2], 0.0);
            assert!(m.membership_error(&y) < 1e-9);
            assert!((m.dist(&o, &y).unwrap().item().unwrap() - s).abs() < 1e-12);
        }
    }

    #[test]
    fn expmap_rejects_off_manifold_base() {
        let m = Lorentz::new(-1.0).unwrap();
        assert!(m.expmap(&t(&[2.0, 0.0]), &t(&[0.0, 1.0])).is_err());
        assert!(m.expmap(&m.origin(1), &t(&[0.0, f64::NAN])).is_err());
    }

    #[test]
    fn logmap_examples() {
        let m = Lorentz::new(-1.0).unwrap();
        let o = m.origin(1);
        assert_eq!(m.logmap(&o, &o).unwrap().max_abs(), 0.0);
        let y = t(&[1f64.cosh(), 1f64.sinh()]);
        let v = m.logmap(&o, &y).unwrap();
        assert!(v.data()[0].abs() < 1e-14 && (v.data()[1] - 1.0).abs() < 1e-14);
    }

    #[test]
    fn distance_rescales_with_curvature() {
        let m = Lorentz::new(-4.0).unwrap();
        let r = m.radius();
        let x = t(&[r, 0.0]);
        let y = t(&[r * 1f64.cosh(), r * 1f64.sinh()]);
        assert!((m.dist(&x, &y).unwrap().item().unwrap() - 0.5).abs() < 1e-14);
        assert_eq!(m.dist(&y, &y).unwrap().item().unwrap(), 0.0);
    }

    #[test]
    fn ptransp_unit_vector_keeps_norm() {
        let m = Lorentz::new(-1.0).unwrap();
        let o = m.origin(1);
        let y = t(&[1f64.cosh(), 1f64.sinh()]);
        let v = t(&[0.0, 1.0]);
        let w = m.ptransp(&o, &y, &v).unwrap();
        assert!(Lorentz::inner(&y, &w).unwrap().item().unwrap().abs() < 1e-14);
        assert!((Lorentz::inner(&w, &w).unwrap().item().unwrap() - 1.0).abs() < 1e-14);
        assert_eq!(
            m.ptransp(&y, &y, &w).unwrap().max_abs_diff(&w).unwrap(),
            0.0
        );
    }

    #[test]
    fn project_examples() {
        let m = Lorentz::new(-1.0).unwrap();
        assert_eq!(m.project(&t(&[2.0, 0.0])).unwrap().data(), &[1.0, 0.0]);
        let x = m.lift(&t(&[0.4, -1.2])).unwrap();
        assert!(m.project(&x.scale(2.0)).unwrap().max_abs_diff(&x).unwrap() < 1e-15);
        assert!(m.project(&t(&[0.5, 1.0])).is_err());
        assert!(m.project(&t(&[1.0, 1.0])).is_err());
    }

    #[test]
    fn lift_examples() {
        let m = Lorentz::new(-1.0).unwrap();
        assert_eq!(m.lift(&t(&[0.0, 0.0])).unwrap().data(), &[1.0, 0.0, 0.0]);
        assert_eq!(
            m.lift(&t(&[1.0, 0.0])).unwrap().data(),
            &[2f64.sqrt(), 1.0, 0.0]
        );
        assert_eq!(
            m.lift(&t(&[3.0, 4.0])).unwrap().data(),
            &[26f64.sqrt(), 3.0, 4.0]
        );
    }

    #[test]
    fn centroid_examples() {
        let m = Lorentz::new(-1.0).unwrap();
        let x = m.lift(&t(&[0.7, -0.2])).unwrap();
        let y = m.lift(&t(&[-0.7, 0.2])).unwrap();
        let pair = Tensor::concat(
            &[&x.reshape(&[1, 3]).unwrap(), &y.reshape(&[1, 3]).unwrap()],
            0,
        )
        .unwrap();
        let mid = m.centroid(&pair, &[1.0, 1.0]).unwrap();
        assert!(mid.max_abs_diff(&m.origin(2)).unwrap() < 1e-15);
        let first = m.centroid(&pair, &[1.0, 0.0]).unwrap();
        assert!(first.max_abs_diff(&x).unwrap() < 1e-15);
        assert!(m.centroid(&pair, &[0.0, 0.0]).is_err());
        let single = m.centroid(&x.reshape(&[1, 3]).unwrap(), &[1.0]).unwrap();
        assert!(single.max_abs_diff(&x).unwrap() < 1e-15);
    }

    #[test]
    fn riemannian_gradient_is_tangent() {
        let m = Lorentz::new(-0.5).unwrap();
        let x = m.lift(&t(&[1.0, 2.0, -0.5])).unwrap();
        let g = m.egrad2rgrad(&x, &t(&[0.3, -1.0, 2.0, 0.1])).unwrap();
        assert!(Lorentz::inner(&x, &g).unwrap().item().unwrap().abs() < 1e-12);
        let zero = m.egrad2rgrad(&x, &Tensor::zeros(&[4])).unwrap();
        assert_eq!(zero.max_abs(), 0.0);
    }

    #[test]
    fn origin_maps_round_trip() {
        let m = Lorentz::new(-2.0).unwrap();
        let u = t(&[0.3, -0.8, 1.1]);
        let x = m.expmap0(&u).unwrap();
        assert!(m.membership_error(&x) < 1e-12);
        assert!(m.logmap0(&x).unwrap().max_abs_diff(&u).unwrap() < 1e-14);
        let full = m.logmap(&m.origin(3), &x).unwrap();
        assert!(full.data()[0].abs() < 1e-14);
        assert!(Lorentz::space(&full).unwrap().max_abs_diff(&u).unwrap() < 1e-13);
    }
}
