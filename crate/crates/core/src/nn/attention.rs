use rand::Rng;

use super::geometry::{self, flip_time, lift, space};
use super::linear::LorentzLinear;
use super::params::{Curv, ParamId, ParamStore, Session};
use crate::autodiff::Var;
use crate::error::{Error, Result};
use crate::tensor::Tensor;

/// Additive mask hiding positions after the query.
pub fn causal_mask(len: usize) -> Tensor {
    Tensor::from_fn(&[len, len], |i| {
        if i % len > i / len {
            f64::NEG_INFINITY
        } else {
            0.0
        }
    })
}

/// Softmax attention over point sequences `[..., L, d+1]`.
///
/// Scores are `(2/K + 2<q,k>_L) / temperature` plus the additive `mask`
/// `[Lq, Lk]`; each output is the weighted centroid of `v`.
pub fn attention<'t>(
    q: Var<'t>,
    k: Var<'t>,
    v: Var<'t>,
    mask: Option<&Tensor>,
    c: Var<'t>,
    temperature: f64,
) -> Result<Var<'t>> {
    let (qs, ks) = (q.shape(), k.shape());
    let nd = qs.len();
    if nd < 2 || ks.len() != nd || qs[nd - 1] != ks[nd - 1] || v.shape()[..nd - 1] != ks[..nd - 1] {
        return Err(Error::shape(
            "attention",
            format!("q {qs:?}, k {ks:?}, v {:?}", v.shape()),
        ));
    }
    let ip = flip_time(q)?.matmul_nt(k)?;
    let mut scores = ip
        .scale(2.0)?
        .sub(c.recip()?.scale(2.0)?)?
        .scale(1.0 / temperature)?;
    if let Some(m) = mask {
        if m.shape() != [qs[nd - 2], ks[nd - 2]] {
            return Err(Error::shape(
                "attention",
                format!("mask {:?} for {}x{}", m.shape(), qs[nd - 2], ks[nd - 2]),
            ));
        }
        if m.rows()
            .any(|row| row.iter().all(|&x| x == f64::NEG_INFINITY))
        {
            return Err(Error::invalid(
                "attention mask hides every key of some query",
            ));
        }
        scores = scores.add(q.tape().constant(m.clone()))?;
    }
    let weights = scores.softmax(nd - 1)?;
    geometry::centroid(v, weights, c)
}

/// Multi-head self-attention; heads split the space coordinates.
#[derive(Clone, Debug)]
pub struct MultiHeadAttention {
    pub q: LorentzLinear,
    pub k: LorentzLinear,
    pub v: LorentzLinear,
    pub out: LorentzLinear,
    pub heads: usize,
    pub dim: usize,
    pub curv: Curv,
}

impl MultiHeadAttention {
    pub fn new<R: Rng + ?Sized>(
        store: &mut ParamStore,
        name: &str,
        dim: usize,
        heads: usize,
        curv: Curv,
        rng: &mut R,
    ) -> Result<Self> {
        if heads == 0 || !dim.is_multiple_of(heads) {
            return Err(Error::invalid(format!(
                "dim {dim} not divisible by {heads} heads"
            )));
        }
        let mut lin = |part: &str| {
            LorentzLinear::new(store, &format!("{name}.{part}"), dim, dim, curv, curv, rng)
        };
        Ok(Self {
            q: lin("q")?,
            k: lin("k")?,
            v: lin("v")?,
            out: lin("out")?,
            heads,
            dim,
            curv,
        })
    }

    pub fn head_dim(&self) -> usize {
        self.dim / self.heads
    }

    /// `[B, L, dim+1] -> [B, heads, L, head_dim+1]`.
    fn split_heads<'t>(&self, x: Var<'t>, c: Var<'t>) -> Result<Var<'t>> {
        let shape = x.shape();
        let (b, l) = (shape[0], shape[1]);
        let u = space(x)?
            .reshape(&[b, l, self.heads, self.head_dim()])?
            .permute(&[0, 2, 1, 3])?;
        lift(u, c)
    }

    /// `x`: `[batch, len, dim+1]`.
    pub fn forward<'t>(
        &self,
        s: &Session<'t>,
        x: Var<'t>,
        mask: Option<&Tensor>,
    ) -> Result<Var<'t>> {
        let shape = x.shape();
        if shape.len() != 3 || shape[2] != self.dim + 1 {
            return Err(Error::shape("attention", format!("input {shape:?}")));
        }
        let c = s.c(self.curv)?;
        let q = self.split_heads(self.q.forward(s, x)?, c)?;
        let k = self.split_heads(self.k.forward(s, x)?, c)?;
        let v = self.split_heads(self.v.forward(s, x)?, c)?;
        let heads = attention(q, k, v, mask, c, (self.head_dim() as f64).sqrt())?;
        // concatenate the heads' space coordinates, then project
        let merged = space(heads)?
            .permute(&[0, 2, 1, 3])?
            .reshape(&[shape[0], shape[1], self.dim])?;
        self.out.forward(s, lift(merged, c)?)
    }

    /// The four projections, in q, k, v, out order.
    pub fn projections_mut(&mut self) -> [&mut LorentzLinear; 4] {
        [&mut self.q, &mut self.k, &mut self.v, &mut self.out]
    }

    pub fn params(&self) -> Vec<ParamId> {
        [&self.q, &self.k, &self.v, &self.out]
            .iter()
            .flat_map(|l| l.params())
            .collect()
    }
}
