//! Decoders and losses.

use super::geometry::{self, exterior_angle, flip_time, half_aperture};
use crate::autodiff::Var;
use crate::error::{Error, Result};
use crate::tensor::Tensor;

/// Logit of the Fermi-Dirac edge probability: `(r - d^2) / t`.
pub fn fermi_dirac_logits<'t>(dist_sq: Var<'t>, r: Var<'t>, t: Var<'t>) -> Result<Var<'t>> {
    if t.value().data().iter().any(|&v| v <= 0.0) {
        return Err(Error::invalid("fermi-dirac temperature must be positive"));
    }
    r.sub(dist_sq)?.div(t)
}

/// `1 / (exp((d^2 - r) / t) + 1)`.
pub fn fermi_dirac<'t>(dist_sq: Var<'t>, r: Var<'t>, t: Var<'t>) -> Result<Var<'t>> {
    fermi_dirac_logits(dist_sq, r, t)?.sigmoid()
}

/// Mean binary cross-entropy on logits; `labels` are 0 or 1.
pub fn bce_with_logits<'t>(logits: Var<'t>, labels: &Tensor) -> Result<Var<'t>> {
    if logits.shape() != labels.shape() {
        return Err(Error::shape(
            "bce",
            format!("{:?} logits, {:?} labels", logits.shape(), labels.shape()),
        ));
    }
    // softplus(l) - y l = -log sigmoid(l) for y = 1 and -log(1 - sigmoid(l)) for y = 0
    let y = logits.tape().constant(labels.clone());
    logits.softplus()?.sub(logits.mul(y)?)?.mean()
}

/// Mean cross-entropy of `logits` `[N, C]` against class indices.
pub fn cross_entropy<'t>(logits: Var<'t>, labels: &[usize]) -> Result<Var<'t>> {
    let shape = logits.shape();
    if shape.len() != 2 || shape[0] != labels.len() || shape[0] == 0 {
        return Err(Error::shape(
            "cross_entropy",
            format!("{shape:?} logits for {} labels", labels.len()),
        ));
    }
    let classes = shape[1];
    if let Some(&bad) = labels.iter().find(|&&l| l >= classes) {
        return Err(Error::invalid(format!(
            "label {bad} out of range for {classes} classes"
        )));
    }
    let one_hot = Tensor::from_fn(&shape, |i| {
        if labels[i / classes] == i % classes {
            1.0
        } else {
            0.0
        }
    });
    let picked = logits
        .log_softmax(1)?
        .mul(logits.tape().constant(one_hot))?
        .sum()?;
    picked.scale(-1.0 / labels.len() as f64)
}

/// Pairwise geodesic distances `[N, M]` between rows of `x` `[N, n+1]` and `y` `[M, n+1]`.
pub fn pairwise_dist<'t>(x: Var<'t>, y: Var<'t>, c: Var<'t>) -> Result<Var<'t>> {
    // q = (-c<x,y> - 1)/2 is c|x - y|_L^2 / 4 on the manifold
    let ip = flip_time(x)?.matmul_nt(y)?;
    let q = ip
        .mul(c)?
        .neg()?
        .add_scalar(-1.0)?
        .scale(0.5)?
        .clamp(1e-24, f64::INFINITY)?;
    q.sqrt()?.asinh()?.scale(2.0)?.div(c.sqrt()?)
}

/// Symmetric cross-entropy over the score matrix `-d(img_i, txt_j) / tau`,
/// with matched pairs on the diagonal.
pub fn contrastive_loss<'t>(img: Var<'t>, txt: Var<'t>, tau: f64, c: Var<'t>) -> Result<Var<'t>> {
    if !(tau > 0.0) {
        return Err(Error::invalid(format!(
            "temperature {tau} must be positive"
        )));
    }
    let n = img.shape()[0];
    if txt.shape()[0] != n {
        return Err(Error::shape(
            "contrastive",
            format!("{n} images, {} texts", txt.shape()[0]),
        ));
    }
    let scores = pairwise_dist(img, txt, c)?.scale(-1.0 / tau)?;
    let labels: Vec<usize> = (0..n).collect();
    let a = cross_entropy(scores, &labels)?;
    let b = cross_entropy(scores.transpose_last()?, &labels)?;
    a.add(b)?.scale(0.5)
}

/// Mean hinge `max(0, angle(x, y) - aperture(x))` for general `x` and specific `y`.
pub fn entailment_loss<'t>(x: Var<'t>, y: Var<'t>, gamma: f64, c: Var<'t>) -> Result<Var<'t>> {
    let angle = exterior_angle(x, y, c)?;
    let aperture = half_aperture(x, gamma, c)?;
    angle.sub(aperture)?.relu()?.mean()
}

/// Squared distances between matching rows, used by the link decoder.
pub fn row_dist_sq<'t>(x: Var<'t>, y: Var<'t>, c: Var<'t>) -> Result<Var<'t>> {
    let d = geometry::dist_sq(x, y, c)?;
    let rows = d.shape()[0];
    d.reshape(&[rows])
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::autodiff::{gradcheck_many, Tape};
    use crate::manifolds::{sample, Lorentz};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn fermi_dirac_is_one_half_at_the_radius() {
        let tape = Tape::new();
        let p = fermi_dirac(tape.scalar(2.0), tape.scalar(2.0), tape.scalar(1.0))
            .unwrap()
            .value();
        assert_eq!(p.item().unwrap(), 0.5);
        assert!(fermi_dirac(tape.scalar(2.0), tape.scalar(2.0), tape.scalar(0.0)).is_err());
        let p = fermi_dirac(tape.scalar(3.0), tape.scalar(2.0), tape.scalar(0.5))
            .unwrap()
            .value();
        assert!((p.item().unwrap() - 1.0 / (2f64.exp() + 1.0)).abs() < 1e-15);
    }

    #[test]
    fn bce_matches_direct_formula() {
        let tape = Tape::new();
        let l = Tensor::from_vec(vec![0.3, -2.0, 4.0]);
        let y = Tensor::from_vec(vec![1.0, 0.0, 0.0]);
        let got = bce_with_logits(tape.constant(l.clone()), &y)
            .unwrap()
            .value()
            .item()
            .unwrap();
        let sig = |v: f64| 1.0 / (1.0 + (-v).exp());
        let want = -(sig(0.3).ln() + (1.0 - sig(-2.0)).ln() + (1.0 - sig(4.0)).ln()) / 3.0;
        assert!((got - want).abs() < 1e-12);
    }

    #[test]
    fn contrastive_loss_of_a_single_matched_pair_is_zero() {
        let l = Lorentz::new(-1.0).unwrap();
        let x = sample::lorentz_points(&l, 1, 3, 1.0, &mut ChaCha8Rng::seed_from_u64(1)).unwrap();
        let tape = Tape::new();
        let v = tape.constant(x);
        let loss = contrastive_loss(v, v, 0.1, tape.scalar(1.0))
            .unwrap()
            .value()
            .item()
            .unwrap();
        assert_eq!(loss, 0.0);
        assert!(contrastive_loss(v, v, 0.0, tape.scalar(1.0)).is_err());
    }

    #[test]
    fn pairwise_distances_match_the_kernel() {
        let l = Lorentz::new(-0.7).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let x = sample::lorentz_points(&l, 3, 4, 2.0, &mut rng).unwrap();
        let y = sample::lorentz_points(&l, 2, 4, 2.0, &mut rng).unwrap();
        let tape = Tape::new();
        let d = pairwise_dist(
            tape.constant(x.clone()),
            tape.constant(y.clone()),
            tape.scalar(0.7),
        )
        .unwrap()
        .value();
        for i in 0..3 {
            for j in 0..2 {
                let want = l
                    .dist(
                        &x.index_select(&[i]).unwrap(),
                        &y.index_select(&[j]).unwrap(),
                    )
                    .unwrap();
                assert!((d.data()[i * 2 + j] - want.data()[0]).abs() < 1e-10);
            }
        }
    }

    #[test]
    fn points_inside_the_cone_cost_nothing() {
        let l = Lorentz::new(-1.0).unwrap();
        // y continues along the ray from the origin through x
        let x = l
            .expmap0(&Tensor::new(&[1, 2], vec![1.2, 0.5]).unwrap())
            .unwrap();
        let y = l
            .expmap0(&Tensor::new(&[1, 2], vec![2.4, 1.0]).unwrap())
            .unwrap();
        let tape = Tape::new();
        let loss =
            entailment_loss(tape.constant(x), tape.constant(y), 0.1, tape.scalar(1.0)).unwrap();
        assert_eq!(loss.value().item().unwrap(), 0.0);
    }

    #[test]
    fn losses_gradcheck() {
        let l = Lorentz::new(-1.0).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let x = sample::lorentz_points(&l, 3, 3, 1.5, &mut rng).unwrap();
        let y = sample::lorentz_points(&l, 3, 3, 1.5, &mut rng).unwrap();
        let r = gradcheck_many(
            |t, v| {
                let c = t.scalar(1.0);
                let a = contrastive_loss(v[0], v[1], 0.5, c)?;
                let b = entailment_loss(v[0], v[1], 0.1, c)?;
                let d = row_dist_sq(v[0], v[1], c)?;
                let p = bce_with_logits(
                    fermi_dirac_logits(d, v[2], v[3])?,
                    &Tensor::from_vec(vec![1.0, 0.0, 1.0]),
                )?;
                a.add(b)?.add(p)
            },
            &[x, y, Tensor::scalar(2.0), Tensor::scalar(1.0)],
            1e-5,
            1e-4,
        )
        .unwrap();
        assert!(r.passed, "{r:?}");
    }
}
