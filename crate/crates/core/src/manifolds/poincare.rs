//! Poincare ball of radius `1/sqrt(c)` with conformal factor `2 / (1 - c|x|^2)`.

use super::{diagnostics, dot, norm_sq, stable, Curvature, Rows};
use crate::error::{Error, Result};
use crate::tensor::Tensor;

/// Points are kept within `(1 - BALL_EPS) / sqrt(c)` of the center.
pub const BALL_EPS: f64 = 1e-12;

const MIN_DENOM: f64 = 1e-15;

/// Norm the transported vector is rescaled to before running it through
/// Mobius additions; gyrations are linear so the scale is undone afterwards.
const GYR_PROBE: f64 = 0.25;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Poincare {
    c: f64,
}

/// Raw Mobius addition of two rows (no ball projection).
pub(crate) fn mobius_add_row(c: f64, x: &[f64], y: &[f64], out: &mut Vec<f64>) -> Result<()> {
    let xy = dot(x, y);
    let x2 = norm_sq(x);
    let y2 = norm_sq(y);
    let a = 1.0 + 2.0 * c * xy + c * y2;
    let b = 1.0 - c * x2;
    let den = 1.0 + 2.0 * c * xy + c * c * x2 * y2;
    if den.abs() < MIN_DENOM {
        return Err(Error::domain("mobius_add", format!("denominator {den:e}")));
    }
    out.extend(x.iter().zip(y).map(|(u, v)| (a * u + b * v) / den));
    Ok(())
}

impl Poincare {
    /// Ball for curvature `k < 0`.
    pub fn new(k: f64) -> Result<Self> {
        Curvature::new(k)?;
        Ok(Self { c: -k })
    }

    pub fn from_curvature(curvature: &Curvature) -> Self {
        Self { c: curvature.c() }
    }

    pub fn c(&self) -> f64 {
        self.c
    }

    pub fn k(&self) -> f64 {
        -self.c
    }

    fn max_norm(&self) -> f64 {
        (1.0 - BALL_EPS) / self.c.sqrt()
    }

    /// Conformal factor per row.
    pub fn lambda(&self, x: &Tensor) -> Tensor {
        let out = x
            .rows()
            .map(|r| 2.0 / (1.0 - self.c * norm_sq(r)))
            .collect();
        Tensor::from_parts(x.batch_shape().to_vec(), out)
    }

    /// Largest `c|x|^2` over rows; a valid batch stays strictly below 1.
    pub fn max_radius_sq(&self, x: &Tensor) -> f64 {
        x.rows().fold(0.0_f64, |m, r| m.max(self.c * norm_sq(r)))
    }

    pub fn check_point(&self, op: &'static str, x: &Tensor) -> Result<()> {
        let bound = 1.0 / self.c - 1e-12;
        for (i, row) in x.rows().enumerate() {
            if !row.iter().all(|v| v.is_finite()) {
                return Err(Error::NonFinite { op });
            }
            let r2 = norm_sq(row);
            if r2 >= bound {
                return Err(Error::OffManifold {
                    detail: format!("{op}: row {i} has |x|^2 = {r2} outside the ball"),
                });
            }
        }
        Ok(())
    }

    fn project_row(&self, row: &mut [f64]) {
        let n = norm_sq(row).sqrt();
        let max = self.max_norm();
        if n > max {
            diagnostics::report_ball(n * self.c.sqrt() - (1.0 - BALL_EPS));
            let s = max / n;
            row.iter_mut().for_each(|v| *v *= s);
        }
    }

    /// Pulls rows that escaped the ball through rounding back inside.
    pub fn project(&self, x: &Tensor) -> Tensor {
        let mut data = x.to_vec();
        for row in data.chunks_exact_mut(x.last_dim().max(1)) {
            self.project_row(row);
        }
        Tensor::from_parts(x.shape().to_vec(), data)
    }

    pub fn mobius_add(&self, x: &Tensor, y: &Tensor) -> Result<Tensor> {
        self.check_point("mobius_add", x)?;
        self.check_point("mobius_add", y)?;
        let p = Rows::of("mobius_add", &[x, y])?;
        let mut out = Vec::with_capacity(p.rows * p.dim);
        for i in 0..p.rows {
            mobius_add_row(self.c, p.get(x, i), p.get(y, i), &mut out)?;
            let start = out.len() - p.dim;
            self.project_row(&mut out[start..]);
        }
        Ok(Tensor::from_parts(p.out_shape(), out))
    }

    /// `(2/sqrt(c)) atanh(sqrt(c) |(-x) + y|)`.
    pub fn dist(&self, x: &Tensor, y: &Tensor) -> Result<Tensor> {
        self.check_point("poincare_dist", x)?;
        self.check_point("poincare_dist", y)?;
        let p = Rows::of("poincare_dist", &[x, y])?;
        let sc = self.c.sqrt();
        let mut buf = Vec::with_capacity(p.dim);
        let mut out = Vec::with_capacity(p.rows);
        for i in 0..p.rows {
            let neg: Vec<f64> = p.get(x, i).iter().map(|v| -v).collect();
            buf.clear();
            mobius_add_row(self.c, &neg, p.get(y, i), &mut buf)?;
            out.push(2.0 / sc * stable::atanh_clamped(sc * norm_sq(&buf).sqrt()));
        }
        Ok(Tensor::from_parts(p.batch, out))
    }

    pub fn expmap(&self, x: &Tensor, v: &Tensor) -> Result<Tensor> {
        self.check_point("poincare_expmap", x)?;
        if !v.all_finite() {
            return Err(Error::NonFinite {
                op: "poincare_expmap",
            });
        }
        let p = Rows::of("poincare_expmap", &[x, v])?;
        let sc = self.c.sqrt();
        let mut out = Vec::with_capacity(p.rows * p.dim);
        for i in 0..p.rows {
            let (xr, vr) = (p.get(x, i), p.get(v, i));
            let lam = 2.0 / (1.0 - self.c * norm_sq(xr));
            let t = 0.5 * sc * lam * norm_sq(vr).sqrt();
            // tanh(t) v / (sqrt(c)|v|) = (lam/2) tanhc(t) v
            let s = 0.5 * lam * stable::tanhc(t);
            let step: Vec<f64> = vr.iter().map(|a| s * a).collect();
            mobius_add_row(self.c, xr, &step, &mut out)?;
            let start = out.len() - p.dim;
            self.project_row(&mut out[start..]);
        }
        Ok(Tensor::from_parts(p.out_shape(), out))
    }

    pub fn logmap(&self, x: &Tensor, y: &Tensor) -> Result<Tensor> {
        self.check_point("poincare_logmap", x)?;
        self.check_point("poincare_logmap", y)?;
        let p = Rows::of("poincare_logmap", &[x, y])?;
        let sc = self.c.sqrt();
        let mut out = Vec::with_capacity(p.rows * p.dim);
        let mut w = Vec::with_capacity(p.dim);
        for i in 0..p.rows {
            let xr = p.get(x, i);
            let neg: Vec<f64> = xr.iter().map(|v| -v).collect();
            w.clear();
            mobius_add_row(self.c, &neg, p.get(y, i), &mut w)?;
            let lam = 2.0 / (1.0 - self.c * norm_sq(xr));
            let a = sc * norm_sq(&w).sqrt();
            let ratio = if a < 1e-8 {
                1.0 + a * a / 3.0
            } else {
                stable::atanh_clamped(a) / a
            };
            // (2/(sqrt(c) lam)) atanh(a) w/|w| = (2/lam) (atanh(a)/a) w
            let s = 2.0 / lam * ratio;
            out.extend(w.iter().map(|v| s * v));
        }
        Ok(Tensor::from_parts(p.out_shape(), out))
    }

    /// `gyr[u, w] z` through the identity `gyr[u,w]z = -(u+w) + (u + (w + z))`.
    pub fn gyration(&self, u: &Tensor, w: &Tensor, z: &Tensor) -> Result<Tensor> {
        let p = Rows::of("gyration", &[u, w, z])?;
        let mut out = Vec::with_capacity(p.rows * p.dim);
        for i in 0..p.rows {
            self.gyration_row(p.get(u, i), p.get(w, i), p.get(z, i), &mut out)?;
        }
        Ok(Tensor::from_parts(p.out_shape(), out))
    }

    fn gyration_row(&self, u: &[f64], w: &[f64], z: &[f64], out: &mut Vec<f64>) -> Result<()> {
        let nz = norm_sq(z).sqrt();
        if nz == 0.0 {
            out.extend(std::iter::repeat_n(0.0, z.len()));
            return Ok(());
        }
        let s = GYR_PROBE / (self.c.sqrt() * nz);
        let probe: Vec<f64> = z.iter().map(|v| v * s).collect();
        let mut uw = Vec::with_capacity(z.len());
        mobius_add_row(self.c, u, w, &mut uw)?;
        let mut wz = Vec::with_capacity(z.len());
        mobius_add_row(self.c, w, &probe, &mut wz)?;
        let mut uwz = Vec::with_capacity(z.len());
        mobius_add_row(self.c, u, &wz, &mut uwz)?;
        let neg: Vec<f64> = uw.iter().map(|v| -v).collect();
        let start = out.len();
        mobius_add_row(self.c, &neg, &uwz, out)?;
        out[start..].iter_mut().for_each(|v| *v /= s);
        Ok(())
    }

    /// `(lam_x / lam_y) gyr[y, -x] v`.
    pub fn ptransp(&self, x: &Tensor, y: &Tensor, v: &Tensor) -> Result<Tensor> {
        self.check_point("poincare_ptransp", x)?;
        self.check_point("poincare_ptransp", y)?;
        let p = Rows::of("poincare_ptransp", &[x, y, v])?;
        let mut out = Vec::with_capacity(p.rows * p.dim);
        for i in 0..p.rows {
            let (xr, yr) = (p.get(x, i), p.get(y, i));
            let neg: Vec<f64> = xr.iter().map(|a| -a).collect();
            let start = out.len();
            self.gyration_row(yr, &neg, p.get(v, i), &mut out)?;
            let ratio = (1.0 - self.c * norm_sq(yr)) / (1.0 - self.c * norm_sq(xr));
            out[start..].iter_mut().for_each(|a| *a *= ratio);
        }
        Ok(Tensor::from_parts(p.out_shape(), out))
    }

    pub fn expmap0(&self, u: &Tensor) -> Result<Tensor> {
        let sc = self.c.sqrt();
        let mut out = Vec::with_capacity(u.numel());
        for row in u.rows() {
            let s = stable::tanhc(sc * norm_sq(row).sqrt());
            let start = out.len();
            out.extend(row.iter().map(|v| s * v));
            self.project_row(&mut out[start..]);
        }
        Ok(Tensor::from_parts(u.shape().to_vec(), out))
    }

    pub fn logmap0(&self, y: &Tensor) -> Result<Tensor> {
        self.check_point("poincare_logmap0", y)?;
        let sc = self.c.sqrt();
        let mut out = Vec::with_capacity(y.numel());
        for row in y.rows() {
            let a = sc * norm_sq(row).sqrt();
            let s = if a < 1e-8 {
                1.0
            } else {
                stable::atanh_clamped(a) / a
            };
            out.extend(row.iter().map(|v| s * v));
        }
        Ok(Tensor::from_parts(y.shape().to_vec(), out))
    }

    /// Riemannian gradient `g / lam_x^2`.
    pub fn egrad2rgrad(&self, x: &Tensor, grad: &Tensor) -> Result<Tensor> {
        let p = Rows::of("poincare_egrad2rgrad", &[x, grad])?;
        let mut out = Vec::with_capacity(p.rows * p.dim);
        for i in 0..p.rows {
            let f = 0.5 * (1.0 - self.c * norm_sq(p.get(x, i)));
            let f2 = f * f;
            out.extend(p.get(grad, i).iter().map(|g| g * f2));
        }
        Ok(Tensor::from_parts(p.out_shape(), out))
    }
}
