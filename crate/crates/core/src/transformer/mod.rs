//! Encoder stack: attention, MoE blocks, embedders and heads.

mod attention;
mod block;
mod embed;

pub use attention::MultiHeadAttention;
pub use block::{dropout, stochastic_depth, EncoderBlock, LayerNormParams};
pub use embed::{extract_patches, PatchEmbedder, ScalarTokenEmbedder};

use alloc::format;
use alloc::vec::Vec;

use crate::config::{HeadKind, InputKind, ModelConfig};
use crate::error::{Error, Result};
use crate::graph::{Graph, Mode, Var};
use crate::params::{ParamId, ParamStore};
use crate::rng::Rng;
use crate::scalar::Scalar;
use crate::tensor::Tensor;
#[cfg(not(feature = "std"))]
use num_traits::Float;

#[derive(Clone, Debug)]
pub enum Embedder {
    Patch(PatchEmbedder),
    Scalar(ScalarTokenEmbedder),
}

/// Batch fed to [`Encoder::forward`].
#[derive(Clone, Copy, Debug)]
pub enum EncoderInput<'a, T> {
    /// `[B, H, W, C]` pixels.
    Images(&'a Tensor<T>),
    /// `[B, arity]` variable values.
    Scalars(&'a Tensor<T>),
}

#[derive(Clone, Debug)]
pub struct Encoder {
    pub embedder: Embedder,
    pub positional: ParamId,
    pub blocks: Vec<EncoderBlock>,
    pub head_w: ParamId,
    pub head_b: ParamId,
    pub head: HeadKind,
    pub dim: usize,
    pub num_tokens: usize,
}

impl Encoder {
    pub fn new<T: Scalar>(cfg: &ModelConfig, store: &mut ParamStore<T>, rng: &mut Rng) -> Result<Self> {
        cfg.validate()?;
        let d = cfg.dim;
        let embedder = match cfg.input {
            InputKind::Image { height, width, channels } => {
                Embedder::Patch(PatchEmbedder::new("embed", height, width, channels, cfg.patch_size, d, store, rng)?)
            }
            InputKind::Scalars { arity } => Embedder::Scalar(ScalarTokenEmbedder::new("embed", arity, d, store, rng)),
        };
        let num_tokens = cfg.num_tokens();
        let positional = store.add_uniform("pos", &[num_tokens, d], 0.02, rng);
        let blocks = (0..cfg.layers)
            .map(|l| EncoderBlock::new(&format!("block{l}"), cfg, cfg.drop_path_prob(l), store, rng))
            .collect::<Result<Vec<_>>>()?;
        let outputs = match cfg.head {
            HeadKind::Classes { count } => count,
            HeadKind::Scalar => 1,
        };
        let head_w = store.add_uniform("head.w", &[d, outputs], 1.0 / (d as f64).sqrt(), rng);
        let head_b = store.add_zeros("head.b", &[outputs]);
        Ok(Encoder {
            embedder,
            positional,
            blocks,
            head_w,
            head_b,
            head: cfg.head.clone(),
            dim: d,
            num_tokens,
        })
    }

    /// Tokens `[B, N, D]` with positional embeddings added.
    pub fn embed<T: Scalar>(&self, g: &mut Graph<'_, T>, input: EncoderInput<'_, T>) -> Result<Var> {
        let tokens = match (&self.embedder, input) {
            (Embedder::Patch(p), EncoderInput::Images(x)) => p.forward(g, x)?,
            (Embedder::Scalar(s), EncoderInput::Scalars(x)) => s.forward(g, x)?,
            _ => return Err(Error::contract("encoder_forward", "input kind does not match the embedder")),
        };
        let pos = g.param(self.positional);
        g.add(tokens, pos)
    }

    /// Logits `[B, classes]` or regression outputs `[B]`.
    pub fn forward<T: Scalar>(&self, g: &mut Graph<'_, T>, input: EncoderInput<'_, T>, mode: Mode, rng: &mut Rng) -> Result<Var> {
        let mut x = self.embed(g, input)?;
        for blk in &self.blocks {
            x = blk.forward(g, x, mode, rng)?;
        }
        let pooled = g.mean_axes(x, &[1], false)?;
        let w = g.param(self.head_w);
        let b = g.param(self.head_b);
        let y = g.matmul(pooled, w)?;
        let y = g.add(y, b)?;
        match self.head {
            HeadKind::Classes { .. } => Ok(y),
            HeadKind::Scalar => {
                let batch = g.shape(y)[0];
                g.reshape(y, &[batch])
            }
        }
    }
}
