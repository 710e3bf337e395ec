use rand::Rng;

use super::geometry::{self, ball};
use super::params::{Curv, ParamId, ParamKind, ParamStore, Session};
use crate::autodiff::Var;
use crate::error::{Error, Result};
use crate::tensor::Tensor;

/// Smooth (or piecewise-linear) maps applied to space coordinates.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Activation {
    Identity,
    Relu,
    Gelu,
    Tanh,
}

impl Activation {
    pub fn apply<'t>(self, u: Var<'t>) -> Result<Var<'t>> {
        match self {
            Activation::Identity => Ok(u),
            Activation::Relu => u.relu(),
            Activation::Gelu => u.gelu(),
            Activation::Tanh => u.tanh(),
        }
    }
}

/// Glorot-uniform initial weights.
pub(crate) fn glorot<R: Rng + ?Sized>(rows: usize, cols: usize, rng: &mut R) -> Tensor {
    let a = (6.0 / (rows + cols) as f64).sqrt();
    Tensor::uniform(&[rows, cols], -a, a, rng)
}

/// Low-rank update attached to a [`LorentzLinear`].
#[derive(Clone, Debug)]
pub struct LoraAdapter {
    pub a: LorentzLinear,
    pub b: LorentzLinear,
    pub rank: usize,
    pub scaling: f64,
}

/// Linear layer between hyperboloids: transforms space coordinates and
/// recomputes the time coordinate at the output curvature.
#[derive(Clone, Debug)]
pub struct LorentzLinear {
    pub weight: ParamId,
    pub bias: Option<ParamId>,
    pub d_in: usize,
    pub d_out: usize,
    pub curv_in: Curv,
    pub curv_out: Curv,
    pub activation: Activation,
    /// Weight acts on all `d_in + 1` ambient coordinates instead of the space part.
    pub full: bool,
    pub lora: Option<Box<LoraAdapter>>,
}

impl LorentzLinear {
    /// `d_in`, `d_out` are manifold dimensions (ambient size minus one).
    pub fn new<R: Rng + ?Sized>(
        store: &mut ParamStore,
        name: &str,
        d_in: usize,
        d_out: usize,
        curv_in: Curv,
        curv_out: Curv,
        rng: &mut R,
    ) -> Result<Self> {
        Self::build(
            store, name, d_in, d_out, curv_in, curv_out, false, true, rng,
        )
    }

    /// Variant whose weight multiplies the full ambient vector.
    pub fn new_full<R: Rng + ?Sized>(
        store: &mut ParamStore,
        name: &str,
        d_in: usize,
        d_out: usize,
        curv_in: Curv,
        curv_out: Curv,
        rng: &mut R,
    ) -> Result<Self> {
        Self::build(store, name, d_in, d_out, curv_in, curv_out, true, true, rng)
    }

    #[allow(clippy::too_many_arguments)]
    fn build<R: Rng + ?Sized>(
        store: &mut ParamStore,
        name: &str,
        d_in: usize,
        d_out: usize,
        curv_in: Curv,
        curv_out: Curv,
        full: bool,
        with_bias: bool,
        rng: &mut R,
    ) -> Result<Self> {
        if d_in == 0 || d_out == 0 {
            return Err(Error::invalid("linear layer dimensions must be positive"));
        }
        let cols = if full { d_in + 1 } else { d_in };
        let weight = store.add(
            format!("{name}.weight"),
            glorot(d_out, cols, rng),
            ParamKind::Euclidean,
        )?;
        let bias = if with_bias {
            Some(store.add(
                format!("{name}.bias"),
                Tensor::zeros(&[d_out]),
                ParamKind::Euclidean,
            )?)
        } else {
            None
        };
        Ok(Self {
            weight,
            bias,
            d_in,
            d_out,
            curv_in,
            curv_out,
            activation: Activation::Identity,
            full,
            lora: None,
        })
    }

    pub fn with_activation(mut self, activation: Activation) -> Self {
        self.activation = activation;
        self
    }

    /// Pre-lift space output `W x_s + b` (activation applied).
    pub fn space_output<'t>(&self, s: &Session<'t>, x: Var<'t>) -> Result<Var<'t>> {
        let shape = x.shape();
        let ambient = *shape
            .last()
            .ok_or_else(|| Error::shape("linear", "scalar input"))?;
        if ambient != self.d_in + 1 {
            return Err(Error::shape(
                "linear",
                format!("expected ambient size {}, got {ambient}", self.d_in + 1),
            ));
        }
        let input = if self.full { x } else { geometry::space(x)? };
        let mut u = as_matrix(input)?.matmul_nt(s.param(self.weight))?;
        if let Some(b) = self.bias {
            u = u.add(s.param(b))?;
        }
        let mut out_shape = shape;
        *out_shape.last_mut().expect("non-empty") = self.d_out;
        let mut u = u.reshape(&out_shape)?;
        if let Some(adapter) = &self.lora {
            // the low-rank path adds B A x_s; with B = 0 this adds exact zeros
            let h = adapter.b.forward(s, adapter.a.forward(s, x)?)?;
            u = u.add(geometry::space(h)?.scale(adapter.scaling)?)?;
        }
        self.activation.apply(u)
    }

    pub fn forward<'t>(&self, s: &Session<'t>, x: Var<'t>) -> Result<Var<'t>> {
        let u = self.space_output(s, x)?;
        geometry::lift(u, s.c(self.curv_out)?)
    }

    /// Attaches a rank-`rank` adapter with scaling `alpha / rank`. The second
    /// factor starts at zero so the layer output is unchanged.
    pub fn attach_lora<R: Rng + ?Sized>(
        &mut self,
        store: &mut ParamStore,
        name: &str,
        rank: usize,
        alpha: f64,
        rng: &mut R,
    ) -> Result<()> {
        if rank == 0 || rank >= self.d_in.min(self.d_out) {
            return Err(Error::invalid(format!(
                "lora rank {rank} must be in 1..{}",
                self.d_in.min(self.d_out)
            )));
        }
        let a = Self::build(
            store,
            &format!("{name}.lora_a"),
            self.d_in,
            rank,
            self.curv_in,
            self.curv_out,
            false,
            false,
            rng,
        )?;
        let b = Self::build(
            store,
            &format!("{name}.lora_b"),
            rank,
            self.d_out,
            self.curv_out,
            self.curv_out,
            false,
            false,
            rng,
        )?;
        store.set_value(b.weight, Tensor::zeros(&[self.d_out, rank]))?;
        self.lora = Some(Box::new(LoraAdapter {
            a,
            b,
            rank,
            scaling: alpha / rank as f64,
        }));
        Ok(())
    }

    /// Parameters owned by this layer, excluding any adapter.
    pub fn params(&self) -> Vec<ParamId> {
        let mut p = vec![self.weight];
        p.extend(self.bias);
        p
    }
}

fn as_matrix(x: Var<'_>) -> Result<Var<'_>> {
    let shape = x.shape();
    if shape.len() >= 2 {
        Ok(x)
    } else {
        x.reshape(&[1, shape[0]])
    }
}

/// Tangent-space linear layer on the Poincare ball: `exp_0(W log_0(x)) (+) exp_0(b)`.
#[derive(Clone, Debug)]
pub struct PoincareLinear {
    pub weight: ParamId,
    pub bias: ParamId,
    pub curv: Curv,
    pub d_in: usize,
    pub d_out: usize,
}

impl PoincareLinear {
    pub fn new<R: Rng + ?Sized>(
        store: &mut ParamStore,
        name: &str,
        d_in: usize,
        d_out: usize,
        curv: Curv,
        rng: &mut R,
    ) -> Result<Self> {
        let weight = store.add(
            format!("{name}.weight"),
            glorot(d_out, d_in, rng),
            ParamKind::Euclidean,
        )?;
        let bias = store.add(
            format!("{name}.bias"),
            Tensor::zeros(&[d_out]),
            ParamKind::Euclidean,
        )?;
        Ok(Self {
            weight,
            bias,
            curv,
            d_in,
            d_out,
        })
    }

    pub fn forward<'t>(&self, s: &Session<'t>, x: Var<'t>) -> Result<Var<'t>> {
        let c = s.c(self.curv)?;
        let u = ball::logmap0(as_matrix(x)?, c)?.matmul_nt(s.param(self.weight))?;
        let h = ball::expmap0(u, c)?;
        let b = ball::expmap0(s.param(self.bias).reshape(&[1, self.d_out])?, c)?;
        ball::mobius_add(h, b, c)
    }
}
