use rand::Rng;

use super::geometry::{self, lift, space};
use super::linear::Activation;
use super::params::{Curv, ParamId, ParamKind, ParamStore, Session};
use crate::autodiff::Var;
use crate::error::{Error, Result};
use crate::manifolds::Lorentz;
use crate::tensor::Tensor;

/// Variance floor inside normalization layers.
pub const NORM_EPS: f64 = 1e-10;

/// Applies `act` to the space coordinates and re-lifts at the same curvature.
pub fn activation<'t>(x: Var<'t>, act: Activation, c: Var<'t>) -> Result<Var<'t>> {
    lift(act.apply(space(x)?)?, c)
}

/// Drops space coordinates with probability `p` during training.
pub fn dropout<'t>(s: &Session<'t>, x: Var<'t>, p: f64, c: Var<'t>) -> Result<Var<'t>> {
    if !(0.0..1.0).contains(&p) {
        return Err(Error::invalid(format!(
            "dropout probability {p} not in [0, 1)"
        )));
    }
    if !s.is_training() || p == 0.0 {
        return Ok(x);
    }
    let xs = space(x)?;
    let shape = xs.shape();
    let keep = 1.0 / (1.0 - p);
    let n: usize = shape.iter().product();
    let mask = s.with_rng(|rng| {
        let data = (0..n)
            .map(|_| if rng.random::<f64>() < p { 0.0 } else { keep })
            .collect();
        Tensor::new(&shape, data)
    })?;
    lift(xs.mul(s.constant(mask))?, c)
}

fn standardize<'t>(u: Var<'t>, mean: Var<'t>, var: Var<'t>) -> Result<Var<'t>> {
    u.sub(mean)?.div(var.add_scalar(NORM_EPS)?.sqrt()?)
}

/// Layer normalization of the space coordinates with an affine map.
#[derive(Clone, Debug)]
pub struct LayerNorm {
    pub gamma: ParamId,
    pub beta: ParamId,
    pub curv: Curv,
    pub dim: usize,
}

impl LayerNorm {
    pub fn new(store: &mut ParamStore, name: &str, dim: usize, curv: Curv) -> Result<Self> {
        let gamma = store.add(
            format!("{name}.gamma"),
            Tensor::ones(&[dim]),
            ParamKind::Euclidean,
        )?;
        let beta = store.add(
            format!("{name}.beta"),
            Tensor::zeros(&[dim]),
            ParamKind::Euclidean,
        )?;
        Ok(Self {
            gamma,
            beta,
            curv,
            dim,
        })
    }

    pub fn forward<'t>(&self, s: &Session<'t>, x: Var<'t>) -> Result<Var<'t>> {
        let u = space(x)?;
        let ax = u.shape().len() - 1;
        if u.shape()[ax] != self.dim {
            return Err(Error::shape(
                "layernorm",
                format!("expected {} features, got {}", self.dim, u.shape()[ax]),
            ));
        }
        let mean = u.mean_axis(ax, true)?;
        let var = u.sub(mean)?.square()?.mean_axis(ax, true)?;
        let y = standardize(u, mean, var)?
            .mul(s.param(self.gamma))?
            .add(s.param(self.beta))?;
        lift(y, s.c(self.curv)?)
    }

    pub fn params(&self) -> Vec<ParamId> {
        vec![self.gamma, self.beta]
    }
}

/// Batch normalization of space coordinates, per feature over all leading axes.
///
/// Running statistics are stored as frozen parameters and updated with
/// [`BatchNorm::update_running`] after a training step.
#[derive(Clone, Debug)]
pub struct BatchNorm {
    pub gamma: ParamId,
    pub beta: ParamId,
    pub running_mean: ParamId,
    pub running_var: ParamId,
    pub curv: Curv,
    pub dim: usize,
    pub momentum: f64,
}

impl BatchNorm {
    pub fn new(store: &mut ParamStore, name: &str, dim: usize, curv: Curv) -> Result<Self> {
        let gamma = store.add(
            format!("{name}.gamma"),
            Tensor::ones(&[dim]),
            ParamKind::Euclidean,
        )?;
        let beta = store.add(
            format!("{name}.beta"),
            Tensor::zeros(&[dim]),
            ParamKind::Euclidean,
        )?;
        let running_mean = store.add(
            format!("{name}.running_mean"),
            Tensor::zeros(&[dim]),
            ParamKind::Euclidean,
        )?;
        let running_var = store.add(
            format!("{name}.running_var"),
            Tensor::ones(&[dim]),
            ParamKind::Euclidean,
        )?;
        store.set_frozen(running_mean, true);
        store.set_frozen(running_var, true);
        Ok(Self {
            gamma,
            beta,
            running_mean,
            running_var,
            curv,
            dim,
            momentum: 0.9,
        })
    }

    fn flat_space<'t>(&self, x: Var<'t>) -> Result<Var<'t>> {
        let u = space(x)?;
        let shape = u.shape();
        if shape.last() != Some(&self.dim) {
            return Err(Error::shape(
                "batchnorm",
                format!("expected {} features, got {shape:?}", self.dim),
            ));
        }
        u.reshape(&[u.value().num_rows(), self.dim])
    }

    pub fn forward<'t>(&self, s: &Session<'t>, x: Var<'t>) -> Result<Var<'t>> {
        let shape = x.shape();
        let u = self.flat_space(x)?;
        let rows = u.shape()[0];
        let (mean, var) = if s.is_training() {
            if rows < 2 {
                return Err(Error::invalid(
                    "batchnorm needs at least two samples in training",
                ));
            }
            let mean = u.mean_axis(0, true)?;
            let var = u.sub(mean)?.square()?.mean_axis(0, true)?;
            (mean, var)
        } else {
            (s.param(self.running_mean), s.param(self.running_var))
        };
        let y = standardize(u, mean, var)?
            .mul(s.param(self.gamma))?
            .add(s.param(self.beta))?;
        let mut out_shape = shape;
        *out_shape.last_mut().expect("non-empty") = self.dim;
        lift(y.reshape(&out_shape)?, s.c(self.curv)?)
    }

    /// Moves the running statistics towards those of the batch `x`.
    pub fn update_running(&self, store: &mut ParamStore, x: &Tensor) -> Result<()> {
        let u = Lorentz::space(x)?;
        let rows = u.num_rows();
        if rows == 0 || u.last_dim() != self.dim {
            return Err(Error::shape("batchnorm", format!("batch {:?}", x.shape())));
        }
        let mut mean = vec![0.0; self.dim];
        for row in u.rows() {
            mean.iter_mut()
                .zip(row)
                .for_each(|(m, v)| *m += v / rows as f64);
        }
        let mut var = vec![0.0; self.dim];
        for row in u.rows() {
            for ((s, v), m) in var.iter_mut().zip(row).zip(&mean) {
                *s += (v - m) * (v - m) / rows as f64;
            }
        }
        let blend = |old: &Tensor, new: Vec<f64>| {
            Tensor::from_fn(&[self.dim], |i| {
                self.momentum * old.data()[i] + (1.0 - self.momentum) * new[i]
            })
        };
        let m = blend(store.value(self.running_mean), mean);
        let v = blend(store.value(self.running_var), var);
        store.set_value(self.running_mean, m)?;
        store.set_value(self.running_var, v)
    }

    pub fn params(&self) -> Vec<ParamId> {
        vec![self.gamma, self.beta]
    }
}

/// Gated residual: `project(scale * (e^{w_x} x + e^{w_y} y))`.
#[derive(Clone, Debug)]
pub struct LResNet {
    pub w_x: ParamId,
    pub w_y: ParamId,
    pub scale: f64,
    pub curv: Curv,
}

/// Default pre-projection scale of [`LResNet`].
pub const LRESNET_SCALE: f64 = 25.0;

impl LResNet {
    pub fn new(store: &mut ParamStore, name: &str, curv: Curv) -> Result<Self> {
        let w_x = store.add(
            format!("{name}.w_x"),
            Tensor::scalar(0.0),
            ParamKind::Euclidean,
        )?;
        let w_y = store.add(
            format!("{name}.w_y"),
            Tensor::scalar(0.0),
            ParamKind::Euclidean,
        )?;
        Ok(Self {
            w_x,
            w_y,
            scale: LRESNET_SCALE,
            curv,
        })
    }

    pub fn forward<'t>(&self, s: &Session<'t>, x: Var<'t>, y: Var<'t>) -> Result<Var<'t>> {
        let gx = s.param(self.w_x).exp()?;
        let gy = s.param(self.w_y).exp()?;
        let z = x.mul(gx)?.add(y.mul(gy)?)?.scale(self.scale)?;
        geometry::project(z, s.c(self.curv)?)
    }

    pub fn params(&self) -> Vec<ParamId> {
        vec![self.w_x, self.w_y]
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::autodiff::{gradcheck_many, Tape};
    use crate::manifolds::sample;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn rng(seed: u64) -> ChaCha8Rng {
        ChaCha8Rng::seed_from_u64(seed)
    }

    fn standardized_rows(rows: usize, dim: usize) -> Tensor {
        // each row is a permutation of a zero-mean, unit-variance pattern
        let base: Vec<f64> = (0..dim)
            .map(|i| i as f64 - (dim - 1) as f64 / 2.0)
            .collect();
        let sd = (base.iter().map(|v| v * v).sum::<f64>() / dim as f64).sqrt();
        Tensor::from_fn(&[rows, dim], |i| base[(i / dim + i % dim) % dim] / sd)
    }

    #[test]
    fn identity_activation_and_zero_dropout_return_input() {
        let l = Lorentz::new(-1.3).unwrap();
        let x = sample::lorentz_points(&l, 4, 5, 2.0, &mut rng(1)).unwrap();
        let mut store = ParamStore::new();
        store
            .add("dummy", Tensor::zeros(&[1]), ParamKind::Euclidean)
            .unwrap();
        let tape = Tape::new();
        let s = Session::new(&tape, &store, true, 3);
        let c = tape.scalar(1.3);
        let xv = tape.constant(x.clone());
        let a = activation(xv, Activation::Identity, c).unwrap().value();
        assert!(a.max_abs_diff(&x).unwrap() < 1e-12);
        let d = dropout(&s, xv, 0.0, c).unwrap().value();
        assert_eq!(d, x);
        assert!(dropout(&s, xv, 1.0, c).is_err());
        let e = dropout(&Session::eval(&tape, &store), xv, 0.5, c)
            .unwrap()
            .value();
        assert_eq!(e, x);
    }

    #[test]
    fn dropout_zeroes_and_rescales_space_coordinates() {
        let l = Lorentz::new(-1.0).unwrap();
        let x = sample::lorentz_points(&l, 50, 8, 1.0, &mut rng(2)).unwrap();
        let store = ParamStore::new();
        let tape = Tape::new();
        let s = Session::new(&tape, &store, true, 9);
        let y = dropout(&s, tape.constant(x.clone()), 0.5, tape.scalar(1.0))
            .unwrap()
            .value();
        assert!(l.membership_error(&y) < 1e-9);
        let (xs, ys) = (Lorentz::space(&x).unwrap(), Lorentz::space(&y).unwrap());
        let mut dropped = 0;
        for (a, b) in xs.data().iter().zip(ys.data()) {
            if *b == 0.0 {
                dropped += 1;
            } else {
                assert!((b - 2.0 * a).abs() < 1e-14);
            }
        }
        assert!((150..250).contains(&dropped), "{dropped}");
    }

    #[test]
    fn layernorm_of_standardized_points_is_identity() {
        let l = Lorentz::new(-0.5).unwrap();
        let x = l.lift(&standardized_rows(3, 6)).unwrap();
        let mut store = ParamStore::new();
        let ln = LayerNorm::new(&mut store, "ln", 6, Curv::Fixed(-0.5)).unwrap();
        let tape = Tape::new();
        let y = ln
            .forward(&Session::eval(&tape, &store), tape.constant(x.clone()))
            .unwrap()
            .value();
        assert!(y.max_abs_diff(&x).unwrap() < 1e-8);
        assert!(l.membership_error(&y) < 1e-9);
    }

    #[test]
    fn batchnorm_standardizes_each_feature() {
        let l = Lorentz::new(-2.0).unwrap();
        let x = sample::lorentz_points(&l, 32, 4, 2.0, &mut rng(4)).unwrap();
        let mut store = ParamStore::new();
        let bn = BatchNorm::new(&mut store, "bn", 4, Curv::Fixed(-2.0)).unwrap();
        let tape = Tape::new();
        let s = Session::new(&tape, &store, true, 0);
        let y = bn.forward(&s, tape.constant(x.clone())).unwrap().value();
        assert!(l.membership_error(&y) < 1e-9);
        let ys = Lorentz::space(&y).unwrap();
        for f in 0..4 {
            let col: Vec<f64> = ys.rows().map(|r| r[f]).collect();
            let mean = col.iter().sum::<f64>() / 32.0;
            let var = col.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / 32.0;
            assert!(mean.abs() <= 1e-9, "{mean}");
            assert!((var - 1.0).abs() <= 1e-6, "{var}");
        }
        let one = sample::lorentz_points(&l, 1, 4, 1.0, &mut rng(5)).unwrap();
        assert!(bn.forward(&s, tape.constant(one)).is_err());
    }

    #[test]
    fn batchnorm_keeps_standardized_batches_and_evaluates_deterministically() {
        let l = Lorentz::new(-1.0).unwrap();
        let x = l.lift(&standardized_rows(5, 5)).unwrap();
        let mut store = ParamStore::new();
        let bn = BatchNorm::new(&mut store, "bn", 5, Curv::Fixed(-1.0)).unwrap();
        let tape = Tape::new();
        let y = bn
            .forward(
                &Session::new(&tape, &store, true, 0),
                tape.constant(x.clone()),
            )
            .unwrap()
            .value();
        let diff = y.max_abs_diff(&x).unwrap();
        assert!(diff <= 1e-9, "{diff}");

        let batch = sample::lorentz_points(&l, 10, 5, 1.5, &mut rng(6)).unwrap();
        bn.update_running(&mut store, &batch).unwrap();
        assert!(store.value(bn.running_mean).max_abs() > 0.0);
        let run = |store: &ParamStore| {
            let tape = Tape::new();
            bn.forward(&Session::eval(&tape, store), tape.constant(batch.clone()))
                .unwrap()
                .value()
        };
        assert_eq!(run(&store), run(&store));
    }

    #[test]
    fn lresnet_of_equal_points_is_identity() {
        let l = Lorentz::new(-0.7).unwrap();
        let x = sample::lorentz_points(&l, 6, 3, 3.0, &mut rng(7)).unwrap();
        let mut store = ParamStore::new();
        let res = LResNet::new(&mut store, "r", Curv::Fixed(-0.7)).unwrap();
        let tape = Tape::new();
        let xv = tape.constant(x.clone());
        let y = res
            .forward(&Session::eval(&tape, &store), xv, xv)
            .unwrap()
            .value();
        assert!(y.max_abs_diff(&x).unwrap() < 1e-12);
    }

    #[test]
    fn transport_residual_with_origin_is_identity() {
        let l = Lorentz::new(-1.5).unwrap();
        let x = sample::lorentz_points(&l, 4, 3, 2.0, &mut rng(8)).unwrap();
        let tape = Tape::new();
        let o = tape.constant(l.origin(3).broadcast_to(&[4, 4]).unwrap());
        let y = geometry::residual_ptransp(tape.constant(x.clone()), o, tape.scalar(1.5))
            .unwrap()
            .value();
        assert!(y.max_abs_diff(&x).unwrap() < 1e-12);
    }

    #[test]
    fn stacked_lresnet_blocks_stay_on_manifold_with_finite_gradients() {
        let l = Lorentz::new(-1.0).unwrap();
        let mut store = ParamStore::new();
        let blocks: Vec<LResNet> = (0..100)
            .map(|i| LResNet::new(&mut store, &format!("r{i}"), Curv::Fixed(-1.0)).unwrap())
            .collect();
        let x0 = sample::lorentz_points(&l, 8, 16, 2.0, &mut rng(9)).unwrap();
        let branch = sample::lorentz_points(&l, 8, 16, 2.0, &mut rng(10)).unwrap();
        let tape = Tape::new();
        let s = Session::new(&tape, &store, true, 0);
        let mut x = tape.var(x0);
        let y = tape.constant(branch);
        let mut drift: f64 = 0.0;
        for b in &blocks {
            x = b.forward(&s, x, y).unwrap();
            drift = drift.max(l.membership_error(&x.value()));
        }
        assert!(drift <= 1e-6, "{drift}");
        let loss = x.sum().unwrap();
        tape.backward(loss).unwrap();
        assert!(s.grads().iter().flatten().all(|g| g.all_finite()));
    }

    #[test]
    fn norm_layers_and_residual_gradcheck() {
        let l = Lorentz::new(-1.0).unwrap();
        let mut store = ParamStore::new();
        let ln = LayerNorm::new(&mut store, "ln", 4, Curv::Fixed(-1.0)).unwrap();
        let bn = BatchNorm::new(&mut store, "bn", 4, Curv::Fixed(-1.0)).unwrap();
        let res = LResNet::new(&mut store, "r", Curv::Fixed(-1.0)).unwrap();
        let x = sample::lorentz_points(&l, 5, 4, 1.5, &mut rng(11)).unwrap();
        let y = sample::lorentz_points(&l, 5, 4, 1.5, &mut rng(12)).unwrap();
        let probe = Tensor::randn(&[5, 5], 1.0, &mut rng(13));
        let g = Tensor::from_vec(vec![1.1, 0.9, 1.3, 0.7]);
        let b = Tensor::from_vec(vec![0.1, -0.2, 0.0, 0.3]);
        let r = gradcheck_many(
            |t, v| {
                let over = [
                    (ln.gamma, v[2]),
                    (ln.beta, v[3]),
                    (bn.gamma, v[2]),
                    (bn.beta, v[3]),
                    (res.w_x, v[4]),
                    (res.w_y, v[5]),
                ];
                let s = Session::bind(t, &store, &over).with_training(true);
                let a = ln.forward(&s, v[0])?;
                let b = bn.forward(&s, v[1])?;
                res.forward(&s, a, b)?.mul(t.constant(probe.clone()))?.sum()
            },
            &[x, y, g, b, Tensor::scalar(0.2), Tensor::scalar(-0.3)],
            1e-5,
            1e-4,
        )
        .unwrap();
        assert!(r.passed, "{r:?}");
    }
}
