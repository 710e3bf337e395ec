//! Random points and tangent vectors for property checks and initialization.

use rand::Rng;
use rand_distr::{Distribution, StandardNormal};

use super::{minkowski_dot, norm_sq, Lorentz, Poincare};
use crate::error::Result;
use crate::tensor::Tensor;

fn gaussian<R: Rng + ?Sized>(n: usize, rng: &mut R) -> Vec<f64> {
    (0..n).map(|_| StandardNormal.sample(rng)).collect()
}

fn unit_direction<R: Rng + ?Sized>(n: usize, rng: &mut R) -> Vec<f64> {
    loop {
        let g = gaussian(n, rng);
        let norm = norm_sq(&g).sqrt();
        if norm > 1e-12 {
            return g.into_iter().map(|v| v / norm).collect();
        }
    }
}

/// `count` tangent directions at the origin with lengths uniform in `[0, max_len]`.
fn origin_tangents<R: Rng + ?Sized>(count: usize, n: usize, max_len: f64, rng: &mut R) -> Tensor {
    let mut data = Vec::with_capacity(count * n);
    for _ in 0..count {
        let len = rng.random_range(0.0..=max_len);
        data.extend(unit_direction(n, rng).into_iter().map(|v| v * len));
    }
    Tensor::from_parts(vec![count, n], data)
}

/// Points `[count, n+1]` at geodesic distance at most `max_dist` from the origin.
pub fn lorentz_points<R: Rng + ?Sized>(
    m: &Lorentz,
    count: usize,
    n: usize,
    max_dist: f64,
    rng: &mut R,
) -> Result<Tensor> {
    m.expmap0(&origin_tangents(count, n, max_dist, rng))
}

/// One tangent vector per row of `x` with Riemannian norm uniform in `[0, max_norm]`.
pub fn lorentz_tangents<R: Rng + ?Sized>(
    m: &Lorentz,
    x: &Tensor,
    max_norm: f64,
    rng: &mut R,
) -> Result<Tensor> {
    let d = x.last_dim();
    let raw = Tensor::from_parts(x.shape().to_vec(), gaussian(x.numel(), rng));
    let tangent = m.proju(x, &raw)?;
    let mut data = tangent.into_vec();
    for row in data.chunks_exact_mut(d) {
        let norm = minkowski_dot(row, row).max(0.0).sqrt();
        let target = rng.random_range(0.0..=max_norm);
        let s = if norm > 0.0 { target / norm } else { 0.0 };
        row.iter_mut().for_each(|v| *v *= s);
    }
    Ok(Tensor::from_parts(x.shape().to_vec(), data))
}

/// Ball points `[count, n]` within geodesic distance `max_dist` of the center.
pub fn poincare_points<R: Rng + ?Sized>(
    b: &Poincare,
    count: usize,
    n: usize,
    max_dist: f64,
    rng: &mut R,
) -> Result<Tensor> {
    // exp_0 uses lambda_0 = 2, so a Euclidean tangent of length L/2 travels L
    b.expmap0(&origin_tangents(count, n, max_dist, rng).scale(0.5))
}

/// Tangent vectors with Riemannian norm `lam_x |v|` uniform in `[0, max_norm]`.
pub fn poincare_tangents<R: Rng + ?Sized>(
    b: &Poincare,
    x: &Tensor,
    max_norm: f64,
    rng: &mut R,
) -> Tensor {
    let n = x.last_dim();
    let mut data = Vec::with_capacity(x.numel());
    for row in x.rows() {
        let lam = 2.0 / (1.0 - b.c() * norm_sq(row));
        let len = rng.random_range(0.0..=max_norm) / lam;
        data.extend(unit_direction(n, rng).into_iter().map(|v| v * len));
    }
    Tensor::from_parts(x.shape().to_vec(), data)
}
