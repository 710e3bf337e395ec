//! Hyperbolic layers built on the autodiff tape.

pub mod attention;
pub mod coords;
mod embed;
pub mod geometry;
mod gnn;
mod head;
mod linear;
pub mod loss;
mod norm;
mod params;
mod transformer;

pub use attention::{attention, causal_mask, MultiHeadAttention};
pub use embed::{random_points, PatchEmbed, PositionalEmbedding, WordEmbedding, EMBED_INIT_STD};
pub use gnn::{normalized_adjacency, CentroidConv, TangentConv};
pub use head::{centroid_pool, mlr_logits, LorentzMlr};
pub use linear::{Activation, LoraAdapter, LorentzLinear, PoincareLinear};
pub use norm::{activation, dropout, BatchNorm, LResNet, LayerNorm, LRESNET_SCALE, NORM_EPS};
pub use params::{Curv, Param, ParamId, ParamKind, ParamStore, Session};
pub use transformer::TransformerBlock;
