//! Entailment cones on the hyperboloid.
//!
//! The cone of `x` is centred on the geodesic ray from the origin through `x`.
//! Its half-aperture shrinks as `x` moves away from the origin; `y` lies in the
//! cone when the exterior angle at `x` between the ray and `y` is within it.

use super::{diagnostics, minkowski_dot, norm_sq, Lorentz, Rows};
use crate::error::{Error, Result};
use crate::tensor::Tensor;

pub const DEFAULT_CONE_GAMMA: f64 = 0.1;

const ANGLE_EPS: f64 = 1e-12;

/// `asin(min(2 gamma / (sqrt(c) |x_s|), 1))` per point.
pub fn half_aperture(lorentz: &Lorentz, x: &Tensor, gamma: f64) -> Result<Tensor> {
    if !(gamma > 0.0) {
        return Err(Error::invalid(format!(
            "cone gamma must be positive, got {gamma}"
        )));
    }
    let sc = lorentz.c().sqrt();
    let out = x
        .rows()
        .map(|row| {
            let arg = 2.0 * gamma / (sc * norm_sq(&row[1..]).sqrt());
            if arg >= 1.0 {
                diagnostics::report_aperture();
                std::f64::consts::FRAC_PI_2
            } else {
                arg.asin()
            }
        })
        .collect();
    Ok(Tensor::from_parts(x.batch_shape().to_vec(), out))
}

/// Exterior angle at `x` of the triangle `(o, x, y)`, in `[0, pi]`.
pub fn exterior_angle(lorentz: &Lorentz, x: &Tensor, y: &Tensor) -> Result<Tensor> {
    let p = Rows::of("exterior_angle", &[x, y])?;
    let c = lorentz.c();
    let out = (0..p.rows)
        .map(|i| {
            let (xr, yr) = (p.get(x, i), p.get(y, i));
            let cxy = c * minkowski_dot(xr, yr);
            let num = yr[0] + xr[0] * cxy;
            let den =
                norm_sq(&xr[1..]).sqrt().max(ANGLE_EPS) * (cxy * cxy - 1.0).max(ANGLE_EPS).sqrt();
            (num / den).clamp(-1.0, 1.0).acos()
        })
        .collect();
    Ok(Tensor::from_parts(p.batch, out))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn aperture_decreases_along_a_ray() {
        let l = Lorentz::new(-1.0).unwrap();
        let mut last = f64::INFINITY;
        for step in 1..40 {
            let x = l
                .lift(&Tensor::from_vec(vec![0.25 * step as f64, 0.0]))
                .unwrap();
            let a = half_aperture(&l, &x, DEFAULT_CONE_GAMMA)
                .unwrap()
                .item()
                .unwrap();
            assert!(a <= last);
            if step > 1 {
                assert!(a < last);
            }
            last = a;
        }
    }

    #[test]
    fn aperture_saturates_near_origin() {
        let l = Lorentz::new(-1.0).unwrap();
        let a = half_aperture(&l, &l.origin(2), 0.1)
            .unwrap()
            .item()
            .unwrap();
        assert_eq!(a, std::f64::consts::FRAC_PI_2);
    }

    #[test]
    fn points_further_along_the_ray_are_inside_the_cone() {
        for &k in &[-0.5, -1.0, -2.0] {
            let l = Lorentz::new(k).unwrap();
            let dir = [0.6, -0.8, 0.0];
            let x = l
                .expmap0(&Tensor::from_vec(dir.iter().map(|d| d * 1.5).collect()))
                .unwrap();
            let aperture = half_aperture(&l, &x, 0.1).unwrap().item().unwrap();
            for j in 1..200 {
                let s = 1.5 + 0.05 * j as f64;
                let y = l
                    .expmap0(&Tensor::from_vec(dir.iter().map(|d| d * s).collect()))
                    .unwrap();
                let angle = exterior_angle(&l, &x, &y).unwrap().item().unwrap();
                assert!(
                    angle <= aperture + 1e-9,
                    "k={k} s={s}: {angle} > {aperture}"
                );
            }
        }
    }

    #[test]
    fn angle_stays_in_range() {
        let l = Lorentz::new(-1.0).unwrap();
        let x = l.lift(&Tensor::from_vec(vec![1.0, 0.5])).unwrap();
        for &u in &[[-3.0, 0.1], [0.0, 0.0], [1.0, 0.5], [50.0, -20.0]] {
            let y = l.lift(&Tensor::from_vec(u.to_vec())).unwrap();
            let a = exterior_angle(&l, &x, &y).unwrap().item().unwrap();
            assert!((0.0..=std::f64::consts::PI).contains(&a));
        }
    }
}
