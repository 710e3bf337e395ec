//! Isometries between the hyperboloid and the ball at the same curvature.
//!
//! With `c = -K`: `p = x_s / (1 + sqrt(c) x_t)` and its inverse
//! `x = ((1 + c|p|^2) / (sqrt(c)(1 - c|p|^2)), 2p / (1 - c|p|^2))`.

use super::{norm_sq, Lorentz, Poincare};
use crate::error::{Error, Result};
use crate::tensor::Tensor;

pub fn to_poincare(lorentz: &Lorentz, x: &Tensor) -> Result<Tensor> {
    lorentz.check_point("to_poincare", x)?;
    let sc = lorentz.c().sqrt();
    let n = x.last_dim() - 1;
    let mut out = Vec::with_capacity(x.num_rows() * n);
    for row in x.rows() {
        let den = 1.0 + sc * row[0];
        out.extend(row[1..].iter().map(|v| v / den));
    }
    let mut shape = x.shape().to_vec();
    *shape.last_mut().unwrap() = n;
    Ok(Tensor::from_parts(shape, out))
}

pub fn to_lorentz(ball: &Poincare, p: &Tensor) -> Result<Tensor> {
    ball.check_point("to_lorentz", p)?;
    let c = ball.c();
    let sc = c.sqrt();
    let n = p.last_dim();
    let mut out = Vec::with_capacity(p.num_rows() * (n + 1));
    for row in p.rows() {
        let r2 = c * norm_sq(row);
        let den = 1.0 - r2;
        let t = (1.0 + r2) / (sc * den);
        if !t.is_finite() {
            return Err(Error::domain(
                "to_lorentz",
                "point too close to the ball boundary",
            ));
        }
        out.push(t);
        out.extend(row.iter().map(|v| 2.0 * v / den));
    }
    let mut shape = p.shape().to_vec();
    *shape.last_mut().unwrap() = n + 1;
    Ok(Tensor::from_parts(shape, out))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn origin_maps_to_center() {
        let l = Lorentz::new(-2.0).unwrap();
        let p = to_poincare(&l, &l.origin(3)).unwrap();
        assert_eq!(p.max_abs(), 0.0);
        let back = to_lorentz(&Poincare::new(-2.0).unwrap(), &p).unwrap();
        assert!(back.max_abs_diff(&l.origin(3)).unwrap() < 1e-15);
    }

    #[test]
    fn radial_distance_is_preserved() {
        for &k in &[-0.5, -1.0, -2.0] {
            let l = Lorentz::new(k).unwrap();
            let b = Poincare::new(k).unwrap();
            let x = l.expmap0(&Tensor::from_vec(vec![1.3, 0.0])).unwrap();
            let p = to_poincare(&l, &x).unwrap();
            let dl = l.dist(&l.origin(2), &x).unwrap().item().unwrap();
            let dp = b.dist(&Tensor::zeros(&[2]), &p).unwrap().item().unwrap();
            assert!((dl - dp).abs() < 1e-12, "k={k}: {dl} vs {dp}");
        }
    }
}
