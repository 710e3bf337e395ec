use rand::Rng;

use super::geometry::{self, lift};
use super::linear::LorentzLinear;
use super::norm::LResNet;
use super::params::{Curv, ParamId, ParamKind, ParamStore, Session};
use crate::autodiff::Var;
use crate::error::{Error, Result};
use crate::manifolds::Lorentz;
use crate::tensor::Tensor;

/// Standard deviation of the space coordinates of fresh table rows.
pub const EMBED_INIT_STD: f64 = 0.02;

fn init_table<R: Rng + ?Sized>(
    store: &ParamStore,
    rows: usize,
    dim: usize,
    curv: Curv,
    rng: &mut R,
) -> Result<Tensor> {
    store
        .lorentz(curv)?
        .lift(&Tensor::randn(&[rows, dim], EMBED_INIT_STD, rng))
}

/// Lookup table of learnable points.
#[derive(Clone, Debug)]
pub struct WordEmbedding {
    pub table: ParamId,
    pub vocab: usize,
    pub dim: usize,
    pub curv: Curv,
}

impl WordEmbedding {
    pub fn new<R: Rng + ?Sized>(
        store: &mut ParamStore,
        name: &str,
        vocab: usize,
        dim: usize,
        curv: Curv,
        rng: &mut R,
    ) -> Result<Self> {
        let table = init_table(store, vocab, dim, curv, rng)?;
        let table = store.add(format!("{name}.table"), table, ParamKind::Lorentz(curv))?;
        Ok(Self {
            table,
            vocab,
            dim,
            curv,
        })
    }

    /// Points for `ids` arranged as `[batch, ids.len() / batch, dim + 1]`.
    pub fn forward<'t>(&self, s: &Session<'t>, ids: &[usize], batch: usize) -> Result<Var<'t>> {
        if let Some(&bad) = ids.iter().find(|&&i| i >= self.vocab) {
            return Err(Error::invalid(format!(
                "token id {bad} out of range for vocabulary {}",
                self.vocab
            )));
        }
        if batch == 0 || !ids.len().is_multiple_of(batch) {
            return Err(Error::shape(
                "word_embedding",
                format!("{} ids in {batch} rows", ids.len()),
            ));
        }
        s.param(self.table)
            .index_select(ids)?
            .reshape(&[batch, ids.len() / batch, self.dim + 1])
    }
}

/// Learned positions merged into tokens with an [`LResNet`].
#[derive(Clone, Debug)]
pub struct PositionalEmbedding {
    pub table: ParamId,
    pub gate: LResNet,
    pub max_len: usize,
    pub dim: usize,
}

impl PositionalEmbedding {
    pub fn new<R: Rng + ?Sized>(
        store: &mut ParamStore,
        name: &str,
        max_len: usize,
        dim: usize,
        curv: Curv,
        rng: &mut R,
    ) -> Result<Self> {
        let table = init_table(store, max_len, dim, curv, rng)?;
        let table = store.add(format!("{name}.table"), table, ParamKind::Lorentz(curv))?;
        let gate = LResNet::new(store, &format!("{name}.gate"), curv)?;
        Ok(Self {
            table,
            gate,
            max_len,
            dim,
        })
    }

    /// `tokens`: `[batch, len, dim + 1]`.
    pub fn forward<'t>(&self, s: &Session<'t>, tokens: Var<'t>) -> Result<Var<'t>> {
        let shape = tokens.shape();
        if shape.len() != 3 || shape[2] != self.dim + 1 {
            return Err(Error::shape(
                "positional_embedding",
                format!("tokens {shape:?}"),
            ));
        }
        if shape[1] > self.max_len {
            return Err(Error::invalid(format!(
                "sequence length {} exceeds {}",
                shape[1], self.max_len
            )));
        }
        let pos = s.param(self.table).slice(0, 0, shape[1])?;
        self.gate.forward(s, tokens, pos)
    }
}

/// Patch embedding: pixels are lifted at the origin, each patch's space
/// coordinates are concatenated and passed through a linear layer.
#[derive(Clone, Debug)]
pub struct PatchEmbed {
    pub patch: usize,
    pub channels: usize,
    pub proj: LorentzLinear,
    pub curv: Curv,
}

impl PatchEmbed {
    pub fn new<R: Rng + ?Sized>(
        store: &mut ParamStore,
        name: &str,
        channels: usize,
        patch: usize,
        dim: usize,
        curv: Curv,
        rng: &mut R,
    ) -> Result<Self> {
        if patch == 0 || channels == 0 {
            return Err(Error::invalid("patch size and channels must be positive"));
        }
        let proj = LorentzLinear::new(
            store,
            &format!("{name}.proj"),
            patch * patch * channels,
            dim,
            curv,
            curv,
            rng,
        )?;
        Ok(Self {
            patch,
            channels,
            proj,
            curv,
        })
    }

    /// `images`: `[batch, channels, height, width]`, already normalized.
    /// Returns `[batch, tokens, dim + 1]` in row-major patch order.
    pub fn forward<'t>(&self, s: &Session<'t>, images: Var<'t>) -> Result<Var<'t>> {
        let shape = images.shape();
        if shape.len() != 4 || shape[1] != self.channels {
            return Err(Error::shape("patch_embed", format!("images {shape:?}")));
        }
        let (b, ch, h, w, p) = (shape[0], shape[1], shape[2], shape[3], self.patch);
        if h % p != 0 || w % p != 0 {
            return Err(Error::shape(
                "patch_embed",
                format!("{h}x{w} not divisible by patch {p}"),
            ));
        }
        let c = s.c(self.curv)?;
        let pixels = geometry::expmap0(images.permute(&[0, 2, 3, 1])?, c)?;
        let (gh, gw) = (h / p, w / p);
        let patches = geometry::space(pixels)?
            .reshape(&[b, gh, p, gw, p, ch])?
            .permute(&[0, 1, 3, 2, 4, 5])?
            .reshape(&[b, gh * gw, p * p * ch])?;
        self.proj.forward(s, lift(patches, c)?)
    }
}

/// Points whose space coordinates are Gaussian with standard deviation `std`.
pub fn random_points<R: Rng + ?Sized>(
    l: &Lorentz,
    shape: &[usize],
    std: f64,
    rng: &mut R,
) -> Result<Tensor> {
    l.lift(&Tensor::randn(shape, std, rng))
}
