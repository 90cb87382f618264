use alloc::format;
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::graph::{Graph, Var};
use crate::params::{ParamId, ParamStore};
use crate::rng::Rng;
use crate::scalar::Scalar;
use crate::tensor::Tensor;
#[cfg(not(feature = "std"))]
use num_traits::Float;

/// Non-overlapping square patches projected to `D`.
#[derive(Clone, Debug)]
pub struct PatchEmbedder {
    pub projection: ParamId,
    pub bias: ParamId,
    pub patch_size: usize,
    pub height: usize,
    pub width: usize,
    pub channels: usize,
}

impl PatchEmbedder {
    #[allow(clippy::too_many_arguments)]
    pub fn new<T: Scalar>(
        prefix: &str,
        height: usize,
        width: usize,
        channels: usize,
        patch_size: usize,
        dim: usize,
        store: &mut ParamStore<T>,
        rng: &mut Rng,
    ) -> Result<Self> {
        if patch_size == 0 || height % patch_size != 0 || width % patch_size != 0 {
            return Err(Error::config(
                "model.patch_size",
                format!("{height}x{width} image is not divisible into {patch_size}x{patch_size} patches"),
            ));
        }
        let fan_in = patch_size * patch_size * channels;
        Ok(PatchEmbedder {
            projection: store.add_uniform(format!("{prefix}.proj"), &[fan_in, dim], 1.0 / (fan_in as f64).sqrt(), rng),
            bias: store.add_zeros(format!("{prefix}.bias"), &[dim]),
            patch_size,
            height,
            width,
            channels,
        })
    }

    pub fn num_patches(&self) -> usize {
        (self.height / self.patch_size) * (self.width / self.patch_size)
    }

    /// `[B, H, W, C]` images to `[B, N, D]` tokens.
    pub fn forward<T: Scalar>(&self, g: &mut Graph<'_, T>, images: &Tensor<T>) -> Result<Var> {
        let expect = [images.shape().first().copied().unwrap_or(0), self.height, self.width, self.channels];
        if images.shape() != expect {
            return Err(Error::shape("patch_embed", images.shape(), &expect));
        }
        let patches = extract_patches(images, self.patch_size)?;
        let p = g.constant(patches);
        let w = g.param(self.projection);
        let b = g.param(self.bias);
        let y = g.matmul(p, w)?;
        g.add(y, b)
    }
}

/// `[B, H, W, C] → [B, (H/P)·(W/P), P·P·C]`; patches in row-major grid
/// order, features ordered (row in patch, column in patch, channel).
pub fn extract_patches<T: Scalar>(images: &Tensor<T>, p: usize) -> Result<Tensor<T>> {
    let s = images.shape();
    if s.len() != 4 || p == 0 || s[1] % p != 0 || s[2] % p != 0 {
        return Err(Error::shape("extract_patches", s, &[0, p, p, 0]));
    }
    let (b, h, w, c) = (s[0], s[1], s[2], s[3]);
    let (gh, gw) = (h / p, w / p);
    let src = images.data();
    let mut out = Vec::with_capacity(images.len());
    for bi in 0..b {
        for py in 0..gh {
            for px in 0..gw {
                for y in 0..p {
                    let row = ((bi * h + py * p + y) * w + px * p) * c;
                    out.extend_from_slice(&src[row..row + p * c]);
                }
            }
        }
    }
    Tensor::new([b, gh * gw, p * p * c], out)
}

/// One token per input variable: `x_i · lift`; the encoder adds the
/// per-position embedding.
#[derive(Clone, Debug)]
pub struct ScalarTokenEmbedder {
    pub lift: ParamId,
    pub arity: usize,
}

impl ScalarTokenEmbedder {
    pub fn new<T: Scalar>(prefix: &str, arity: usize, dim: usize, store: &mut ParamStore<T>, rng: &mut Rng) -> Self {
        ScalarTokenEmbedder {
            lift: store.add_uniform(format!("{prefix}.lift"), &[1, dim], 1.0, rng),
            arity,
        }
    }

    /// `[B, arity] → [B, arity, D]`.
    pub fn forward<T: Scalar>(&self, g: &mut Graph<'_, T>, x: &Tensor<T>) -> Result<Var> {
        let s = x.shape();
        if s.len() != 2 || s[1] != self.arity {
            return Err(Error::shape("scalar_embed", s, &[0, self.arity]));
        }
        let v = g.constant(x.clone().reshape(&[s[0], self.arity, 1])?);
        let lift = g.param(self.lift);
        g.matmul(v, lift)
    }
}
