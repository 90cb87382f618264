use alloc::format;

use crate::error::{Error, Result};
use crate::graph::{Graph, Var};
use crate::params::{ParamId, ParamStore};
use crate::rng::Rng;
use crate::scalar::Scalar;
#[cfg(not(feature = "std"))]
use num_traits::Float;

/// Scaled dot-product self-attention without biases or masking.
#[derive(Clone, Debug)]
pub struct MultiHeadAttention {
    pub w_q: ParamId,
    pub w_k: ParamId,
    pub w_v: ParamId,
    pub w_o: ParamId,
    pub num_heads: usize,
    pub dim: usize,
}

impl MultiHeadAttention {
    pub fn new<T: Scalar>(prefix: &str, dim: usize, num_heads: usize, store: &mut ParamStore<T>, rng: &mut Rng) -> Result<Self> {
        if num_heads == 0 || dim % num_heads != 0 {
            return Err(Error::config(
                "model.heads",
                format!("model.dim {dim} is not divisible by {num_heads} heads"),
            ));
        }
        let bound = 1.0 / (dim as f64).sqrt();
        let mut w = |n: &str| store.add_uniform(format!("{prefix}.{n}"), &[dim, dim], bound, rng);
        Ok(MultiHeadAttention {
            w_q: w("w_q"),
            w_k: w("w_k"),
            w_v: w("w_v"),
            w_o: w("w_o"),
            num_heads,
            dim,
        })
    }

    pub fn head_dim(&self) -> usize {
        self.dim / self.num_heads
    }

    /// `[B, N, D] → [B, N, D]`.
    pub fn forward<T: Scalar>(&self, g: &mut Graph<'_, T>, x: Var) -> Result<Var> {
        let s = g.shape(x).to_vec();
        if s.len() != 3 || s[2] != self.dim {
            return Err(Error::shape("mha_forward", &s, &[0, 0, self.dim]));
        }
        let (b, n, d) = (s[0], s[1], s[2]);
        let (h, hd) = (self.num_heads, self.head_dim());
        let split = |g: &mut Graph<'_, T>, w: ParamId| -> Result<Var> {
            let wv = g.param(w);
            let y = g.matmul(x, wv)?;
            let y = g.reshape(y, &[b, n, h, hd])?;
            g.permute(y, &[0, 2, 1, 3])
        };
        let q = split(g, self.w_q)?;
        let k = split(g, self.w_k)?;
        let v = split(g, self.w_v)?;
        let kt = g.transpose_last(k)?;
        let scores = g.matmul(q, kt)?;
        let scores = g.scale(scores, T::of_f64(1.0 / (hd as f64).sqrt()));
        let att = g.softmax(scores, &[3])?;
        let ctx = g.matmul(att, v)?;
        let ctx = g.permute(ctx, &[0, 2, 1, 3])?;
        let ctx = g.reshape(ctx, &[b, n, d])?;
        let wo = g.param(self.w_o);
        g.matmul(ctx, wo)
    }
}
