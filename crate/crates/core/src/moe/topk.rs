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

/// Linear gate `g(x) = x · W`, `W ∈ R^{D×NE}`, keeping the `k` most
/// probable experts per token.
#[derive(Clone, Debug)]
pub struct TopKGate {
    pub w_gate: ParamId,
    num_experts: usize,
    k: usize,
    renormalize: bool,
}

/// Result of gating `T = B·N` tokens.
#[derive(Clone, Debug)]
pub struct TopKSelection {
    /// `[T, NE]` softmax probabilities over all experts.
    pub probs: Var,
    /// `[T, k]` weights applied to the selected experts' outputs.
    pub weights: Var,
    /// `T·k` expert indices, per token in descending probability order.
    pub indices: Vec<usize>,
    pub k: usize,
    pub num_experts: usize,
}

impl TopKSelection {
    /// Dense `[B, N, NE]` weights with exactly `k` nonzeros per token.
    pub fn dense_weights<T: Scalar>(&self, g: &Graph<'_, T>, batch: usize, tokens: usize) -> Tensor<T> {
        let w = g.value(self.weights);
        let mut out = Tensor::zeros([batch, tokens, self.num_experts]);
        let d = out.data_mut();
        for t in 0..batch * tokens {
            for j in 0..self.k {
                d[t * self.num_experts + self.indices[t * self.k + j]] = w[t * self.k + j];
            }
        }
        out
    }
}

impl TopKGate {
    pub fn new<T: Scalar>(
        prefix: &str,
        dim: usize,
        num_experts: usize,
        k: usize,
        renormalize: bool,
        store: &mut ParamStore<T>,
        rng: &mut Rng,
    ) -> Result<Self> {
        if k == 0 || k > num_experts {
            return Err(Error::contract("topk_gate", format!("k = {k} outside [1, {num_experts}]")));
        }
        let bound = 1.0 / (dim as f64).sqrt();
        Ok(TopKGate {
            w_gate: store.add_uniform(format!("{prefix}.w"), &[dim, num_experts], bound, rng),
            num_experts,
            k,
            renormalize,
        })
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn num_experts(&self) -> usize {
        self.num_experts
    }

    /// Gate `[B, N, D]` tokens.
    pub fn select<T: Scalar>(&self, g: &mut Graph<'_, T>, x: Var) -> Result<TopKSelection> {
        let s = g.shape(x).to_vec();
        if s.len() != 3 {
            return Err(Error::shape("topk_gate", &s, &[0, 0, 0]));
        }
        let tokens = s[0] * s[1];
        let xf = g.reshape(x, &[tokens, s[2]])?;
        let w = g.param(self.w_gate);
        let logits = g.matmul(xf, w)?;
        topk_from_logits(g, logits, self.k, self.renormalize)
    }
}

/// Gate from precomputed `[T, NE]` logits.
pub fn topk_from_logits<T: Scalar>(g: &mut Graph<'_, T>, logits: Var, k: usize, renormalize: bool) -> Result<TopKSelection> {
    let s = g.shape(logits).to_vec();
    let (tokens, ne) = (s[0], s[1]);
    if k == 0 || k > ne {
        return Err(Error::contract("topk_gate", format!("k = {k} outside [1, {ne}]")));
    }
    let probs = g.softmax(logits, &[1])?;
    let mut indices = Vec::with_capacity(tokens * k);
    for row in g.value(probs).chunks(ne) {
        indices.extend(select_top_k(row, k));
    }
    let flat: Vec<usize> = indices.iter().enumerate().map(|(i, &e)| (i / k) * ne + e).collect();
    let weights = if renormalize {
        // p_i / Σ_selected p_j == softmax over the selected logits
        let sel = g.gather_elems(logits, &flat, &[tokens, k])?;
        g.softmax(sel, &[1])?
    } else {
        g.gather_elems(probs, &flat, &[tokens, k])?
    };
    Ok(TopKSelection {
        probs,
        weights,
        indices,
        k,
        num_experts: ne,
    })
}

/// Indices of the `k` largest scores, descending; equal scores go to the
/// lower index.
pub fn select_top_k<T: PartialOrd + Copy>(scores: &[T], k: usize) -> Vec<usize> {
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| {
        scores[b]
            .partial_cmp(&scores[a])
            .unwrap_or(core::cmp::Ordering::Equal)
            .then(a.cmp(&b))
    });
    order.truncate(k);
    order
}
