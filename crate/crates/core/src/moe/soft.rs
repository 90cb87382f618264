use alloc::format;

use crate::config::NormMode;
use crate::error::{Error, Result};
use crate::graph::{Graph, Var};
use crate::params::{ParamId, ParamStore};
use crate::rng::Rng;
use crate::scalar::Scalar;
#[cfg(not(feature = "std"))]
use num_traits::Float;

/// Learnable slot embeddings `E ∈ R^{NE×S×D}`.
#[derive(Clone, Debug)]
pub struct SoftMoeRouter {
    pub slot_embeddings: ParamId,
    num_experts: usize,
    slots: usize,
    dim: usize,
    norm_mode: NormMode,
}

impl SoftMoeRouter {
    pub fn new<T: Scalar>(
        prefix: &str,
        num_experts: usize,
        slots: usize,
        dim: usize,
        norm_mode: NormMode,
        store: &mut ParamStore<T>,
        rng: &mut Rng,
    ) -> Self {
        let bound = 1.0 / (dim as f64).sqrt();
        SoftMoeRouter {
            slot_embeddings: store.add_uniform(format!("{prefix}.slots"), &[num_experts, slots, dim], bound, rng),
            num_experts,
            slots,
            dim,
            norm_mode,
        }
    }

    pub fn num_experts(&self) -> usize {
        self.num_experts
    }

    pub fn slots(&self) -> usize {
        self.slots
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn norm_mode(&self) -> NormMode {
        self.norm_mode
    }

    pub fn compute_logits<T: Scalar>(&self, g: &mut Graph<'_, T>, x: Var) -> Result<Var> {
        let e = g.param(self.slot_embeddings);
        compute_logits(g, x, e)
    }
}

/// `logits[b,n,e,s] = ⟨x[b,n,:], E[e,s,:]⟩`.
pub fn compute_logits<T: Scalar>(g: &mut Graph<'_, T>, x: Var, slot_embeddings: Var) -> Result<Var> {
    let sx = g.shape(x).to_vec();
    let se = g.shape(slot_embeddings).to_vec();
    if sx.len() != 3 || se.len() != 3 || sx[2] != se[2] {
        return Err(Error::shape("compute_logits", &sx, &se));
    }
    let (b, n, d) = (sx[0], sx[1], sx[2]);
    let (ne, s) = (se[0], se[1]);
    let flat = g.reshape(slot_embeddings, &[ne * s, d])?;
    let et = g.transpose_last(flat)?;
    let l = g.matmul(x, et)?;
    g.reshape(l, &[b, n, ne, s])
}

/// Paper mode: softmax over (expert, slot) per token. Standard mode:
/// softmax over tokens per (expert, slot).
pub fn dispatch_weights<T: Scalar>(g: &mut Graph<'_, T>, logits: Var, mode: NormMode) -> Result<Var> {
    if g.shape(logits).len() != 4 {
        return Err(Error::shape("dispatch_weights", g.shape(logits), &[0, 0, 0, 0]));
    }
    match mode {
        NormMode::Paper => g.softmax(logits, &[2, 3]),
        NormMode::Standard => g.softmax(logits, &[1]),
    }
}

/// `z[b,e,s,:] = Σ_n α[b,n,e,s] · x[b,n,:]`.
pub fn route_inputs<T: Scalar>(g: &mut Graph<'_, T>, x: Var, alpha: Var) -> Result<Var> {
    let sx = g.shape(x).to_vec();
    let sa = g.shape(alpha).to_vec();
    if sx.len() != 3 || sa.len() != 4 || sa[0] != sx[0] || sa[1] != sx[1] {
        return Err(Error::shape("route_inputs", &sx, &sa));
    }
    let (b, n, d) = (sx[0], sx[1], sx[2]);
    let (ne, s) = (sa[2], sa[3]);
    let a = g.reshape(alpha, &[b, n, ne * s])?;
    let at = g.permute(a, &[0, 2, 1])?;
    let z = g.matmul(at, x)?;
    g.reshape(z, &[b, ne, s, d])
}

/// Token output = Σ_{e,s} c[b,n,e,s] · y[b,e,s,:] with c the per-token
/// softmax of `logits` over (expert, slot).
pub fn combine_outputs<T: Scalar>(g: &mut Graph<'_, T>, expert_out: Var, logits: Var) -> Result<Var> {
    let sy = g.shape(expert_out).to_vec();
    let sl = g.shape(logits).to_vec();
    if sy.len() != 4 || sl.len() != 4 || sy[0] != sl[0] || sy[1] != sl[2] || sy[2] != sl[3] {
        return Err(Error::shape("combine_outputs", &sy, &sl));
    }
    let (b, ne, s, d) = (sy[0], sy[1], sy[2], sy[3]);
    let n = sl[1];
    let c = g.softmax(logits, &[2, 3])?;
    let c = g.reshape(c, &[b, n, ne * s])?;
    let y = g.reshape(expert_out, &[b, ne * s, d])?;
    g.matmul(c, y)
}
