use rand::Rng;

use super::attention::MultiHeadAttention;
use super::linear::{Activation, LorentzLinear};
use super::norm::{dropout, LResNet, LayerNorm};
use super::params::{Curv, ParamId, ParamStore, Session};
use crate::autodiff::Var;
use crate::error::Result;
use crate::tensor::Tensor;

/// Pre-norm block: attention and a 4x feed-forward, each joined by an [`LResNet`].
/// All sub-layers share one curvature.
#[derive(Clone, Debug)]
pub struct TransformerBlock {
    pub ln1: LayerNorm,
    pub attn: MultiHeadAttention,
    pub res1: LResNet,
    pub ln2: LayerNorm,
    pub fc1: LorentzLinear,
    pub fc2: LorentzLinear,
    pub res2: LResNet,
    pub dropout: f64,
    pub curv: Curv,
}

impl TransformerBlock {
    pub fn new<R: Rng + ?Sized>(
        store: &mut ParamStore,
        name: &str,
        dim: usize,
        heads: usize,
        curv: Curv,
        dropout: f64,
        rng: &mut R,
    ) -> Result<Self> {
        let hidden = 4 * dim;
        Ok(Self {
            ln1: LayerNorm::new(store, &format!("{name}.ln1"), dim, curv)?,
            attn: MultiHeadAttention::new(store, &format!("{name}.attn"), dim, heads, curv, rng)?,
            res1: LResNet::new(store, &format!("{name}.res1"), curv)?,
            ln2: LayerNorm::new(store, &format!("{name}.ln2"), dim, curv)?,
            fc1: LorentzLinear::new(store, &format!("{name}.fc1"), dim, hidden, curv, curv, rng)?
                .with_activation(Activation::Gelu),
            fc2: LorentzLinear::new(store, &format!("{name}.fc2"), hidden, dim, curv, curv, rng)?,
            res2: LResNet::new(store, &format!("{name}.res2"), curv)?,
            dropout,
            curv,
        })
    }

    /// `x`: `[batch, len, dim + 1]`.
    pub fn forward<'t>(
        &self,
        s: &Session<'t>,
        x: Var<'t>,
        mask: Option<&Tensor>,
    ) -> Result<Var<'t>> {
        self.forward_traced(s, x, mask, None)
    }

    /// As [`forward`](Self::forward), also pushing every sub-layer output onto `trace`.
    pub fn forward_traced<'t>(
        &self,
        s: &Session<'t>,
        x: Var<'t>,
        mask: Option<&Tensor>,
        mut trace: Option<&mut Vec<Tensor>>,
    ) -> Result<Var<'t>> {
        let mut keep = |v: Var<'t>| {
            if let Some(t) = trace.as_deref_mut() {
                t.push(v.value());
            }
            v
        };
        let c = s.c(self.curv)?;
        let h = keep(self.ln1.forward(s, x)?);
        let h = keep(self.attn.forward(s, h, mask)?);
        let h = keep(dropout(s, h, self.dropout, c)?);
        let x = keep(self.res1.forward(s, x, h)?);
        let h = keep(self.ln2.forward(s, x)?);
        let h = keep(self.fc1.forward(s, h)?);
        let h = keep(self.fc2.forward(s, h)?);
        let h = keep(dropout(s, h, self.dropout, c)?);
        Ok(keep(self.res2.forward(s, x, h)?))
    }

    pub fn params(&self) -> Vec<ParamId> {
        let mut p = self.ln1.params();
        p.extend(self.attn.params());
        p.extend(self.res1.params());
        p.extend(self.ln2.params());
        p.extend(self.fc1.params());
        p.extend(self.fc2.params());
        p.extend(self.res2.params());
        p
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::autodiff::{gradcheck_many, Tape};
    use crate::manifolds::Lorentz;
    use crate::nn::attention::causal_mask;
    use crate::nn::embed::random_points;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn block_on_full_size_input_stays_on_manifold_with_finite_gradients() {
        let l = Lorentz::new(-1.0).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let mut store = ParamStore::new();
        let block = TransformerBlock::new(&mut store, "b", 64, 4, Curv::Fixed(-1.0), 0.1, &mut rng)
            .unwrap();
        let x = random_points(&l, &[4, 16, 64], 0.3, &mut rng).unwrap();
        let tape = Tape::new();
        let s = Session::new(&tape, &store, true, 7);
        let xv = tape.var(x);
        let mut trace = Vec::new();
        let y = block
            .forward_traced(&s, xv, None, Some(&mut trace))
            .unwrap();
        assert_eq!(y.shape(), vec![4, 16, 65]);
        assert_eq!(trace.len(), 9);
        assert!(trace.iter().all(|t| l.membership_error(t) < 1e-9));
        assert!(l.membership_error(&y.value()) < 1e-9);
        let loss = y.square().unwrap().mean().unwrap();
        tape.backward(loss).unwrap();
        assert!(xv.grad().unwrap().all_finite());
        let grads = s.grads();
        for id in block.params() {
            assert!(grads[id.index()].as_ref().unwrap().all_finite());
        }
    }

    #[test]
    fn block_gradchecks() {
        let l = Lorentz::new(-1.0).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let mut store = ParamStore::new();
        let block =
            TransformerBlock::new(&mut store, "b", 4, 2, Curv::Fixed(-1.0), 0.0, &mut rng).unwrap();
        let x = random_points(&l, &[1, 3, 4], 0.5, &mut rng).unwrap();
        let w = store.value(block.fc1.weight).clone();
        let probe = Tensor::randn(&[1, 3, 5], 1.0, &mut rng);
        let mask = causal_mask(3);
        let r = gradcheck_many(
            |t, v| {
                let s = Session::bind(t, &store, &[(block.fc1.weight, v[1])]);
                block
                    .forward(&s, v[0], Some(&mask))?
                    .mul(t.constant(probe.clone()))?
                    .sum()
            },
            &[x, w],
            1e-5,
            1e-4,
        )
        .unwrap();
        assert!(r.passed, "{r:?}");
    }
}
