//! Geometry invariant suite over random points in several dimensions and curvatures.

use std::time::Instant;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use hypkit::manifolds::{minkowski_dot, sample, to_lorentz, to_poincare, Lorentz, Poincare};
use hypkit::Tensor;

use crate::error::Result;

pub const DIMS: [usize; 3] = [2, 8, 64];
pub const CURVATURES: [f64; 3] = [-0.5, -1.0, -2.0];
pub const COUNT: usize = 1000;
pub const TRIPLES: usize = 10_000;
/// Base points for membership and round trips stay near the origin; the
/// absolute membership error of a point grows like `eps * x_t^2`.
const BASE_DIST: f64 = 0.5;
const FAR_DIST: f64 = 3.0;
const TANGENT_NORM: f64 = 5.0;

/// Deliberate defects for checking that the suite notices them.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Mutation {
    /// The suite's Lorentzian inner product adds the time term instead of subtracting it.
    InnerProductSign,
}

#[derive(Clone, Debug)]
pub struct Check {
    pub name: &'static str,
    pub dim: usize,
    pub k: f64,
    pub max_err: f64,
    pub tol: f64,
}

impl Check {
    pub fn passed(&self) -> bool {
        self.max_err <= self.tol
    }
}

#[derive(Clone, Debug)]
pub struct SelftestReport {
    pub checks: Vec<Check>,
    pub seconds: f64,
}

impl SelftestReport {
    pub fn passed(&self) -> bool {
        self.checks.iter().all(Check::passed)
    }

    pub fn failures(&self) -> impl Iterator<Item = &Check> {
        self.checks.iter().filter(|c| !c.passed())
    }

    /// Worst case per check name, in first-seen order.
    pub fn summary(&self) -> Vec<Check> {
        let mut out: Vec<Check> = Vec::new();
        for c in &self.checks {
            match out.iter_mut().find(|o| o.name == c.name) {
                Some(o) if c.max_err / c.tol > o.max_err / o.tol || c.max_err.is_nan() => {
                    *o = c.clone()
                }
                Some(_) => {}
                None => out.push(c.clone()),
            }
        }
        out
    }
}

type Inner = fn(&[f64], &[f64]) -> f64;

fn flipped(x: &[f64], y: &[f64]) -> f64 {
    minkowski_dot(x, y) + 2.0 * x[0] * y[0]
}

fn row_inner(inner: Inner, a: &Tensor, b: &Tensor) -> Vec<f64> {
    a.rows().zip(b.rows()).map(|(x, y)| inner(x, y)).collect()
}

fn membership(inner: Inner, m: &Lorentz, x: &Tensor) -> f64 {
    let target = 1.0 / m.k();
    x.rows()
        .map(|r| {
            if r[0] > 0.0 {
                (inner(r, r) - target).abs()
            } else {
                f64::INFINITY
            }
        })
        .fold(0.0, f64::max)
}

fn max_diff(a: &[f64], b: &[f64]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y).abs())
        .fold(0.0, f64::max)
}

/// Runs every check; a kernel error counts as a failed check with infinite error.
pub fn run(seed: u64, mutation: Option<Mutation>) -> Result<SelftestReport> {
    let start = Instant::now();
    let inner: Inner = match mutation {
        None => minkowski_dot,
        Some(Mutation::InnerProductSign) => flipped,
    };
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut checks = Vec::new();
    let mut push = |name, dim, k, err: hypkit::Result<f64>, tol| {
        checks.push(Check {
            name,
            dim,
            k,
            max_err: err.unwrap_or(f64::INFINITY),
            tol,
        })
    };
    for &n in &DIMS {
        for &k in &CURVATURES {
            let m = Lorentz::new(k)?;
            let b = Poincare::new(k)?;

            let round_trip = (|| -> hypkit::Result<(f64, f64)> {
                let x = sample::lorentz_points(&m, COUNT, n, BASE_DIST, &mut rng)?;
                let v = sample::lorentz_tangents(&m, &x, TANGENT_NORM, &mut rng)?;
                let y = m.expmap(&x, &v)?;
                let back = m.logmap(&x, &y)?;
                Ok((
                    membership(inner, &m, &x).max(membership(inner, &m, &y)),
                    back.max_abs_diff(&v)?,
                ))
            })();
            let (mem, rt) = round_trip.unwrap_or((f64::INFINITY, f64::INFINITY));
            push("lorentz.membership", n, k, Ok(mem), 1e-9);
            push("lorentz.exp_log_round_trip", n, k, Ok(rt), 1e-8);

            let poincare_rt = (|| {
                let x = sample::poincare_points(&b, COUNT, n, BASE_DIST, &mut rng)?;
                let v = sample::poincare_tangents(&b, &x, TANGENT_NORM, &mut rng);
                let y = b.expmap(&x, &v)?;
                b.check_point("selftest", &y)?;
                b.logmap(&x, &y)?.max_abs_diff(&v)
            })();
            push("poincare.exp_log_round_trip", n, k, poincare_rt, 1e-8);

            let transport = (|| {
                let x = sample::lorentz_points(&m, COUNT, n, FAR_DIST, &mut rng)?;
                let y = sample::lorentz_points(&m, COUNT, n, FAR_DIST, &mut rng)?;
                let u = sample::lorentz_tangents(&m, &x, TANGENT_NORM, &mut rng)?;
                let w = sample::lorentz_tangents(&m, &x, TANGENT_NORM, &mut rng)?;
                let (pu, pw) = (m.ptransp(&x, &y, &u)?, m.ptransp(&x, &y, &w)?);
                Ok(max_diff(
                    &row_inner(inner, &u, &w),
                    &row_inner(inner, &pu, &pw),
                ))
            })();
            push("lorentz.transport_inner_drift", n, k, transport, 1e-9);

            let ball_transport = (|| {
                let x = sample::poincare_points(&b, COUNT, n, FAR_DIST, &mut rng)?;
                let y = sample::poincare_points(&b, COUNT, n, FAR_DIST, &mut rng)?;
                let v = sample::poincare_tangents(&b, &x, TANGENT_NORM, &mut rng);
                let pv = b.ptransp(&x, &y, &v)?;
                let (lx, ly) = (b.lambda(&x), b.lambda(&y));
                let norm =
                    |t: &Tensor, i: usize| t.row(i).iter().map(|a| a * a).sum::<f64>().sqrt();
                Ok((0..COUNT)
                    .map(|i| (norm(&v, i) * lx.data()[i] - norm(&pv, i) * ly.data()[i]).abs())
                    .fold(0.0, f64::max))
            })();
            push("poincare.transport_norm_drift", n, k, ball_transport, 1e-8);

            let isometry = (|| {
                let x = sample::lorentz_points(&m, COUNT, n, FAR_DIST, &mut rng)?;
                let y = sample::lorentz_points(&m, COUNT, n, FAR_DIST, &mut rng)?;
                let (px, py) = (to_poincare(&m, &x)?, to_poincare(&m, &y)?);
                let d = m.dist(&x, &y)?.max_abs_diff(&b.dist(&px, &py)?)?;
                let back = to_lorentz(&b, &px)?;
                let rel = back
                    .data()
                    .iter()
                    .zip(x.data())
                    .map(|(a, c)| (a - c).abs() / a.abs().max(c.abs()).max(1.0))
                    .fold(0.0, f64::max);
                Ok(d.max(rel))
            })();
            push("model_isometry", n, k, isometry, 1e-8);
        }
    }

    let m = Lorentz::new(-1.0)?;
    let triangle = (|| {
        let x = sample::lorentz_points(&m, TRIPLES, 8, 4.0, &mut rng)?;
        let y = sample::lorentz_points(&m, TRIPLES, 8, 4.0, &mut rng)?;
        let z = sample::lorentz_points(&m, TRIPLES, 8, 4.0, &mut rng)?;
        let (dxy, dyz, dxz) = (m.dist(&x, &y)?, m.dist(&y, &z)?, m.dist(&x, &z)?);
        // violation beyond the triangle bound; 0 when the inequality holds
        Ok((0..TRIPLES)
            .map(|i| (dxz.data()[i] - dxy.data()[i] - dyz.data()[i]).max(0.0))
            .fold(0.0, f64::max))
    })();
    push("triangle_inequality", 8, -1.0, triangle, 1e-9);

    Ok(SelftestReport {
        checks,
        seconds: start.elapsed().as_secs_f64(),
    })
}

/// Human-readable table of the worst case per check.
pub fn format_report(report: &SelftestReport) -> String {
    let mut s = String::new();
    for c in report.summary() {
        s.push_str(&format!(
            "{:<32} worst at dim {:>2}, K {:>4}: {:.3e} (tol {:.0e}) {}\n",
            c.name,
            c.dim,
            c.k,
            c.max_err,
            c.tol,
            if c.passed() { "PASS" } else { "FAIL" }
        ));
    }
    s.push_str(&format!(
        "{} checks, {} failed, {:.1} s\n",
        report.checks.len(),
        report.failures().count(),
        report.seconds
    ));
    s
}
