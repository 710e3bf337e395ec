//! Models assembled from the layer catalog for the CLI tasks.

use rand::Rng;

use hypkit::autodiff::Var;
use hypkit::nn::{
    centroid_pool, Curv, LorentzMlr, ParamStore, PatchEmbed, PositionalEmbedding, Session,
    TransformerBlock, WordEmbedding,
};
use hypkit::{Result, Tensor};

#[derive(Clone, Copy, Debug)]
pub struct EncoderShape {
    pub dim: usize,
    pub heads: usize,
    pub layers: usize,
    pub classes: usize,
    pub dropout: f64,
}

/// Positional gate, transformer blocks, centroid pooling and an MLR head.
#[derive(Clone, Debug)]
pub struct Encoder {
    pub pos: PositionalEmbedding,
    pub blocks: Vec<TransformerBlock>,
    pub head: LorentzMlr,
    pub curv: Curv,
}

impl Encoder {
    fn new<R: Rng + ?Sized>(
        store: &mut ParamStore,
        len: usize,
        shape: EncoderShape,
        curv: Curv,
        rng: &mut R,
    ) -> Result<Self> {
        let pos = PositionalEmbedding::new(store, "pos", len, shape.dim, curv, rng)?;
        let blocks = (0..shape.layers)
            .map(|i| {
                TransformerBlock::new(
                    store,
                    &format!("block{i}"),
                    shape.dim,
                    shape.heads,
                    curv,
                    shape.dropout,
                    rng,
                )
            })
            .collect::<Result<Vec<_>>>()?;
        let head = LorentzMlr::new(store, "head", shape.dim, shape.classes, curv, rng)?;
        Ok(Self {
            pos,
            blocks,
            head,
            curv,
        })
    }

    /// Logits plus every intermediate representation when `trace` is set.
    fn forward<'t>(
        &self,
        s: &Session<'t>,
        tokens: Var<'t>,
        trace: Option<&mut Vec<Tensor>>,
    ) -> Result<Var<'t>> {
        let mut x = self.pos.forward(s, tokens)?;
        let mut seen = trace.is_some().then(|| vec![tokens.value(), x.value()]);
        for block in &self.blocks {
            x = block.forward_traced(s, x, None, seen.as_mut())?;
        }
        let pooled = centroid_pool(x, s.c(self.curv)?)?;
        if let (Some(t), Some(mut seen)) = (trace, seen) {
            seen.push(pooled.value());
            t.append(&mut seen);
        }
        self.head.forward(s, pooled)
    }

    pub fn attention_projections(
        &mut self,
    ) -> impl Iterator<Item = &mut hypkit::nn::LorentzLinear> {
        self.blocks.iter_mut().flat_map(|b| {
            let [q, k, v, _] = b.attn.projections_mut();
            [q, k, v]
        })
    }
}

/// Token classifier: word embedding in front of an [`Encoder`].
#[derive(Clone, Debug)]
pub struct SequenceModel {
    pub embed: WordEmbedding,
    pub encoder: Encoder,
    pub len: usize,
}

impl SequenceModel {
    pub fn new<R: Rng + ?Sized>(
        store: &mut ParamStore,
        vocab: usize,
        len: usize,
        shape: EncoderShape,
        curv: Curv,
        rng: &mut R,
    ) -> Result<Self> {
        let embed = WordEmbedding::new(store, "embed", vocab, shape.dim, curv, rng)?;
        let encoder = Encoder::new(store, len, shape, curv, rng)?;
        Ok(Self {
            embed,
            encoder,
            len,
        })
    }

    /// `tokens` holds `batch` sequences back to back; returns `[batch, classes]`.
    pub fn forward<'t>(
        &self,
        s: &Session<'t>,
        tokens: &[usize],
        trace: Option<&mut Vec<Tensor>>,
    ) -> Result<Var<'t>> {
        let batch = tokens.len() / self.len;
        let x = self.embed.forward(s, tokens, batch)?;
        self.encoder.forward(s, x, trace)
    }
}

/// Patch classifier: patch embedding in front of an [`Encoder`].
#[derive(Clone, Debug)]
pub struct ImageModel {
    pub patch: PatchEmbed,
    pub encoder: Encoder,
}

impl ImageModel {
    #[allow(clippy::too_many_arguments)]
    pub fn new<R: Rng + ?Sized>(
        store: &mut ParamStore,
        channels: usize,
        size: usize,
        patch: usize,
        shape: EncoderShape,
        curv: Curv,
        rng: &mut R,
    ) -> Result<Self> {
        if patch == 0 || !size.is_multiple_of(patch) {
            return Err(hypkit::Error::InvalidArgument(format!(
                "patch {patch} does not tile image size {size}"
            )));
        }
        let grid = size / patch;
        let patch_embed = PatchEmbed::new(store, "patch", channels, patch, shape.dim, curv, rng)?;
        let encoder = Encoder::new(store, grid * grid, shape, curv, rng)?;
        Ok(Self {
            patch: patch_embed,
            encoder,
        })
    }

    /// `images`: `[batch, channels, size, size]`.
    pub fn forward<'t>(
        &self,
        s: &Session<'t>,
        images: &Tensor,
        trace: Option<&mut Vec<Tensor>>,
    ) -> Result<Var<'t>> {
        let x = self.patch.forward(s, s.constant(images.clone()))?;
        self.encoder.forward(s, x, trace)
    }
}

/// Model input for one batch.
#[derive(Clone, Debug)]
pub enum Input {
    Tokens(Vec<usize>),
    Images(Tensor),
}

/// Either transformer-toy model.
#[derive(Clone, Debug)]
pub enum ToyModel {
    Sequence(SequenceModel),
    Image(ImageModel),
}

impl ToyModel {
    pub fn forward<'t>(
        &self,
        s: &Session<'t>,
        input: &Input,
        trace: Option<&mut Vec<Tensor>>,
    ) -> Result<Var<'t>> {
        match (self, input) {
            (ToyModel::Sequence(m), Input::Tokens(t)) => m.forward(s, t, trace),
            (ToyModel::Image(m), Input::Images(x)) => m.forward(s, x, trace),
            _ => Err(hypkit::Error::InvalidArgument(
                "input does not match the model".into(),
            )),
        }
    }

    pub fn encoder(&self) -> &Encoder {
        match self {
            ToyModel::Sequence(m) => &m.encoder,
            ToyModel::Image(m) => &m.encoder,
        }
    }

    pub fn encoder_mut(&mut self) -> &mut Encoder {
        match self {
            ToyModel::Sequence(m) => &mut m.encoder,
            ToyModel::Image(m) => &mut m.encoder,
        }
    }
}
