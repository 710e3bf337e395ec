//! Batch-level geometric identities over random points in several dimensions
//! and curvatures.

use hypkit::manifolds::{sample, to_lorentz, to_poincare, Lorentz, Poincare};
use hypkit::Tensor;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

const DIMS: [usize; 3] = [2, 8, 64];
const CURVATURES: [f64; 3] = [-0.5, -1.0, -2.0];
const COUNT: usize = 1000;
// Absolute membership error grows like eps * x_t^2, so base points stay near the
// origin and the long excursions come from the tangent vectors.
const BASE_DIST: f64 = 0.5;

fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

fn max_rel(a: &Tensor, b: &Tensor) -> f64 {
    a.data()
        .iter()
        .zip(b.data())
        .map(|(x, y)| (x - y).abs() / x.abs().max(y.abs()).max(1.0))
        .fold(0.0, f64::max)
}

#[test]
fn lorentz_exp_log_round_trip_and_membership() {
    let mut r = rng(1);
    for &n in &DIMS {
        for &k in &CURVATURES {
            let m = Lorentz::new(k).unwrap();
            let x = sample::lorentz_points(&m, COUNT, n, BASE_DIST, &mut r).unwrap();
            let v = sample::lorentz_tangents(&m, &x, 5.0, &mut r).unwrap();
            let y = m.expmap(&x, &v).unwrap();
            assert!(m.membership_error(&x) <= 1e-9);
            assert!(
                m.membership_error(&y) <= 1e-9,
                "n={n} k={k}: {}",
                m.membership_error(&y)
            );
            let back = m.logmap(&x, &y).unwrap();
            let err = back.max_abs_diff(&v).unwrap();
            assert!(err <= 1e-8, "n={n} k={k}: {err}");
        }
    }
}

#[test]
fn poincare_exp_log_round_trip() {
    let mut r = rng(2);
    for &n in &DIMS {
        for &k in &CURVATURES {
            let b = Poincare::new(k).unwrap();
            let x = sample::poincare_points(&b, COUNT, n, BASE_DIST, &mut r).unwrap();
            let v = sample::poincare_tangents(&b, &x, 5.0, &mut r);
            let y = b.expmap(&x, &v).unwrap();
            b.check_point("test", &y).unwrap();
            let back = b.logmap(&x, &y).unwrap();
            let err = back.max_abs_diff(&v).unwrap();
            assert!(err <= 1e-8, "n={n} k={k}: {err}");
        }
    }
}

#[test]
fn transports_are_isometries() {
    let mut r = rng(3);
    for &n in &DIMS {
        for &k in &CURVATURES {
            let m = Lorentz::new(k).unwrap();
            let x = sample::lorentz_points(&m, COUNT, n, 3.0, &mut r).unwrap();
            let y = sample::lorentz_points(&m, COUNT, n, 3.0, &mut r).unwrap();
            let u = sample::lorentz_tangents(&m, &x, 5.0, &mut r).unwrap();
            let w = sample::lorentz_tangents(&m, &x, 5.0, &mut r).unwrap();
            let pu = m.ptransp(&x, &y, &u).unwrap();
            let pw = m.ptransp(&x, &y, &w).unwrap();
            let before = Lorentz::inner(&u, &w).unwrap();
            let after = Lorentz::inner(&pu, &pw).unwrap();
            let drift = before.max_abs_diff(&after).unwrap();
            assert!(drift <= 1e-9, "lorentz n={n} k={k}: {drift}");
            assert!(Lorentz::inner(&y, &pu).unwrap().max_abs() <= 1e-8);

            let b = Poincare::new(k).unwrap();
            let x = sample::poincare_points(&b, COUNT, n, 3.0, &mut r).unwrap();
            let y = sample::poincare_points(&b, COUNT, n, 3.0, &mut r).unwrap();
            let v = sample::poincare_tangents(&b, &x, 5.0, &mut r);
            let pv = b.ptransp(&x, &y, &v).unwrap();
            let (lx, ly) = (b.lambda(&x), b.lambda(&y));
            let mut worst = 0.0f64;
            for i in 0..COUNT {
                let nv = v.row(i).iter().map(|a| a * a).sum::<f64>().sqrt() * lx.data()[i];
                let np = pv.row(i).iter().map(|a| a * a).sum::<f64>().sqrt() * ly.data()[i];
                worst = worst.max((nv - np).abs());
            }
            assert!(worst <= 1e-8, "poincare n={n} k={k}: {worst}");
        }
    }
}

#[test]
fn model_conversion_is_an_isometric_bijection() {
    let mut r = rng(4);
    for &n in &[2usize, 8] {
        for &k in &CURVATURES {
            let m = Lorentz::new(k).unwrap();
            let b = Poincare::new(k).unwrap();
            let x = sample::lorentz_points(&m, COUNT, n, 4.0, &mut r).unwrap();
            let y = sample::lorentz_points(&m, COUNT, n, 4.0, &mut r).unwrap();
            let (px, py) = (to_poincare(&m, &x).unwrap(), to_poincare(&m, &y).unwrap());
            let dl = m.dist(&x, &y).unwrap();
            let dp = b.dist(&px, &py).unwrap();
            assert!(dl.max_abs_diff(&dp).unwrap() <= 1e-8);
            let back = to_lorentz(&b, &px).unwrap();
            assert!(max_rel(&back, &x) <= 1e-9);
        }
    }
}

#[test]
fn distances_are_metric() {
    let mut r = rng(5);
    let m = Lorentz::new(-1.0).unwrap();
    let b = Poincare::new(-1.0).unwrap();
    let triples = 10_000;
    let (x, y, z) = (
        sample::lorentz_points(&m, triples, 8, 4.0, &mut r).unwrap(),
        sample::lorentz_points(&m, triples, 8, 4.0, &mut r).unwrap(),
        sample::lorentz_points(&m, triples, 8, 4.0, &mut r).unwrap(),
    );
    let (dxy, dyz, dxz) = (
        m.dist(&x, &y).unwrap(),
        m.dist(&y, &z).unwrap(),
        m.dist(&x, &z).unwrap(),
    );
    for i in 0..triples {
        assert!(dxz.data()[i] <= dxy.data()[i] + dyz.data()[i] + 1e-9);
    }
    assert!(m.dist(&y, &x).unwrap().max_abs_diff(&dxy).unwrap() <= 1e-10);
    assert!(m.dist(&x, &x).unwrap().max_abs() <= 1e-9);

    let (px, py) = (to_poincare(&m, &x).unwrap(), to_poincare(&m, &y).unwrap());
    let d1 = b.dist(&px, &py).unwrap();
    assert!(b.dist(&py, &px).unwrap().max_abs_diff(&d1).unwrap() <= 1e-10);
    assert!(b.dist(&px, &px).unwrap().max_abs() <= 1e-9);
}

#[test]
fn centroid_is_scale_and_permutation_invariant() {
    let mut r = rng(6);
    let m = Lorentz::new(-1.5).unwrap();
    let pts = sample::lorentz_points(&m, 7, 5, 2.0, &mut r).unwrap();
    let w: Vec<f64> = (0..7).map(|i| 0.1 + i as f64).collect();
    let w2: Vec<f64> = w.iter().map(|v| 2.0 * v).collect();
    let a = m.centroid(&pts, &w).unwrap();
    let b = m.centroid(&pts, &w2).unwrap();
    assert!(a.max_abs_diff(&b).unwrap() <= 1e-10);
    let order = [3usize, 0, 6, 1, 5, 2, 4];
    let permuted = pts.index_select(&order).unwrap();
    let wp: Vec<f64> = order.iter().map(|&i| w[i]).collect();
    assert!(
        m.centroid(&permuted, &wp)
            .unwrap()
            .max_abs_diff(&a)
            .unwrap()
            <= 1e-10
    );
    assert!(m.membership_error(&a) <= 1e-9);
}

#[test]
fn curvature_rescaling_scales_distances() {
    let mut r = rng(7);
    let unit = Lorentz::new(-1.0).unwrap();
    let x = sample::lorentz_points(&unit, 200, 4, 3.0, &mut r).unwrap();
    let y = sample::lorentz_points(&unit, 200, 4, 3.0, &mut r).unwrap();
    let d1 = unit.dist(&x, &y).unwrap();
    for &k in &[-0.25f64, -4.0] {
        let m = Lorentz::new(k).unwrap();
        let s = m.radius();
        let dk = m.dist(&x.scale(s), &y.scale(s)).unwrap();
        let expect = d1.scale(1.0 / (-k).sqrt());
        assert!(dk.max_abs_diff(&expect).unwrap() <= 1e-10);
    }
}
