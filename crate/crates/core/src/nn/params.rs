//! Named parameter storage and per-step binding onto a tape.

use std::cell::RefCell;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::autodiff::{Tape, Var};
use crate::error::{Error, Result};
use crate::manifolds::{Curvature, Lorentz, Poincare};
use crate::tensor::Tensor;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct ParamId(pub(crate) usize);

impl ParamId {
    pub fn index(self) -> usize {
        self.0
    }
}

/// Curvature used by a layer: a constant or a learnable parameter.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Curv {
    Fixed(f64),
    Learned(ParamId),
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum ParamKind {
    Euclidean,
    /// Raw value of a learnable curvature (`K = -exp(raw)`).
    Curvature,
    /// Rows are points on the hyperboloid at the given curvature.
    Lorentz(Curv),
    /// Rows are points in the ball at the given curvature.
    Poincare(Curv),
}

impl ParamKind {
    pub fn is_manifold(&self) -> bool {
        matches!(self, ParamKind::Lorentz(_) | ParamKind::Poincare(_))
    }

    pub fn label(&self) -> &'static str {
        match self {
            ParamKind::Euclidean => "euclidean",
            ParamKind::Curvature => "curvature",
            ParamKind::Lorentz(_) => "lorentz",
            ParamKind::Poincare(_) => "poincare",
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Param {
    pub name: String,
    pub value: Tensor,
    pub kind: ParamKind,
    pub frozen: bool,
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct ParamStore {
    params: Vec<Param>,
}

impl ParamStore {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn add(
        &mut self,
        name: impl Into<String>,
        value: Tensor,
        kind: ParamKind,
    ) -> Result<ParamId> {
        let name = name.into();
        if self.find(&name).is_some() {
            return Err(Error::invalid(format!("duplicate parameter name {name:?}")));
        }
        if !value.all_finite() {
            return Err(Error::NonFinite { op: "param" });
        }
        self.params.push(Param {
            name,
            value,
            kind,
            frozen: false,
        });
        Ok(ParamId(self.params.len() - 1))
    }

    /// Registers a curvature parameter; fixed curvatures need no storage.
    pub fn curvature(&mut self, name: impl Into<String>, curvature: Curvature) -> Result<Curv> {
        if curvature.is_learnable() {
            let id = self.add(name, Tensor::scalar(curvature.raw()), ParamKind::Curvature)?;
            Ok(Curv::Learned(id))
        } else {
            Ok(Curv::Fixed(curvature.value()))
        }
    }

    pub fn len(&self) -> usize {
        self.params.len()
    }

    pub fn is_empty(&self) -> bool {
        self.params.is_empty()
    }

    pub fn ids(&self) -> impl Iterator<Item = ParamId> {
        (0..self.params.len()).map(ParamId)
    }

    pub fn iter(&self) -> impl Iterator<Item = (ParamId, &Param)> {
        self.params.iter().enumerate().map(|(i, p)| (ParamId(i), p))
    }

    pub fn find(&self, name: &str) -> Option<ParamId> {
        self.params.iter().position(|p| p.name == name).map(ParamId)
    }

    pub fn get(&self, id: ParamId) -> &Param {
        &self.params[id.0]
    }

    pub fn value(&self, id: ParamId) -> &Tensor {
        &self.params[id.0].value
    }

    pub fn set_value(&mut self, id: ParamId, value: Tensor) -> Result<()> {
        let p = &mut self.params[id.0];
        if value.shape() != p.value.shape() {
            return Err(Error::shape(
                "param",
                format!(
                    "{}: {:?} replaced by {:?}",
                    p.name,
                    p.value.shape(),
                    value.shape()
                ),
            ));
        }
        if !value.all_finite() {
            return Err(Error::NonFinite { op: "param" });
        }
        p.value = value;
        Ok(())
    }

    pub fn set_frozen(&mut self, id: ParamId, frozen: bool) {
        self.params[id.0].frozen = frozen;
    }

    /// Freezes every parameter currently registered.
    pub fn freeze_all(&mut self) {
        self.params.iter_mut().for_each(|p| p.frozen = true);
    }

    /// Curvature `K` currently held by `curv`.
    pub fn k(&self, curv: Curv) -> f64 {
        match curv {
            Curv::Fixed(k) => k,
            Curv::Learned(id) => -self.params[id.0].value.data()[0].exp(),
        }
    }

    pub fn lorentz(&self, curv: Curv) -> Result<Lorentz> {
        Lorentz::new(self.k(curv))
    }

    pub fn poincare(&self, curv: Curv) -> Result<Poincare> {
        Poincare::new(self.k(curv))
    }

    /// Total number of scalar entries.
    pub fn numel(&self) -> usize {
        self.params.iter().map(|p| p.value.numel()).sum()
    }
}

/// A [`ParamStore`] bound onto a tape for one forward/backward pass.
pub struct Session<'t> {
    tape: &'t Tape,
    vars: Vec<Var<'t>>,
    training: bool,
    rng: RefCell<ChaCha8Rng>,
}

impl<'t> Session<'t> {
    /// Binds every parameter; frozen ones become constants.
    pub fn new(tape: &'t Tape, store: &ParamStore, training: bool, seed: u64) -> Self {
        let vars = store
            .params
            .iter()
            .map(|p| {
                if p.frozen {
                    tape.constant(p.value.clone())
                } else {
                    tape.var(p.value.clone())
                }
            })
            .collect();
        Self {
            tape,
            vars,
            training,
            rng: RefCell::new(ChaCha8Rng::seed_from_u64(seed)),
        }
    }

    /// Evaluation-mode session with every parameter constant.
    pub fn eval(tape: &'t Tape, store: &ParamStore) -> Self {
        let vars = store
            .params
            .iter()
            .map(|p| tape.constant(p.value.clone()))
            .collect();
        Self {
            tape,
            vars,
            training: false,
            rng: RefCell::new(ChaCha8Rng::seed_from_u64(0)),
        }
    }

    /// Session where the listed parameters are the given vars and every
    /// other parameter is a constant. Used to differentiate through layers
    /// with respect to chosen parameters.
    pub fn bind(tape: &'t Tape, store: &ParamStore, overrides: &[(ParamId, Var<'t>)]) -> Self {
        let mut s = Self::eval(tape, store);
        for &(id, v) in overrides {
            s.vars[id.0] = v;
        }
        s
    }

    pub fn with_training(mut self, training: bool) -> Self {
        self.training = training;
        self
    }

    pub fn tape(&self) -> &'t Tape {
        self.tape
    }

    pub fn is_training(&self) -> bool {
        self.training
    }

    pub fn param(&self, id: ParamId) -> Var<'t> {
        self.vars[id.0]
    }

    /// `c = -K` as a scalar on the tape.
    pub fn c(&self, curv: Curv) -> Result<Var<'t>> {
        match curv {
            Curv::Fixed(k) => Ok(self.tape.scalar(-k)),
            Curv::Learned(id) => self.vars[id.0].exp(),
        }
    }

    pub fn constant(&self, t: Tensor) -> Var<'t> {
        self.tape.constant(t)
    }

    pub fn with_rng<T>(&self, f: impl FnOnce(&mut ChaCha8Rng) -> T) -> T {
        f(&mut self.rng.borrow_mut())
    }

    /// Gradients aligned with the store, available after backward.
    pub fn grads(&self) -> Vec<Option<Tensor>> {
        self.vars.iter().map(|v| v.grad()).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn duplicate_names_are_rejected() {
        let mut s = ParamStore::new();
        s.add("w", Tensor::zeros(&[2]), ParamKind::Euclidean)
            .unwrap();
        assert!(s
            .add("w", Tensor::zeros(&[2]), ParamKind::Euclidean)
            .is_err());
    }

    #[test]
    fn learnable_curvature_round_trips_through_raw() {
        let mut s = ParamStore::new();
        let curv = s
            .curvature("k", Curvature::learnable(-0.7).unwrap())
            .unwrap();
        assert!((s.k(curv) + 0.7).abs() < 1e-15);
        let fixed = s.curvature("k2", Curvature::new(-2.0).unwrap()).unwrap();
        assert_eq!(fixed, Curv::Fixed(-2.0));
        assert_eq!(s.len(), 1);
    }

    #[test]
    fn frozen_params_bind_as_constants() {
        let mut s = ParamStore::new();
        let a = s
            .add("a", Tensor::ones(&[2]), ParamKind::Euclidean)
            .unwrap();
        let b = s
            .add("b", Tensor::ones(&[2]), ParamKind::Euclidean)
            .unwrap();
        s.set_frozen(b, true);
        let tape = Tape::new();
        let sess = Session::new(&tape, &s, true, 0);
        let loss = sess.param(a).mul(sess.param(b)).unwrap().sum().unwrap();
        tape.backward(loss).unwrap();
        let g = sess.grads();
        assert!(g[a.index()].is_some());
        assert!(g[b.index()].is_none());
    }
}
