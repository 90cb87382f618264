//! Mixture-of-experts sublayer over a heterogeneous expert pool.
//!
//! Two routers are available:
//!
//! * [`SoftMoeRouter`]: tokens are blended into `S` slots per expert by
//!   dispatch weights computed from learnable slot embeddings; each expert
//!   runs on its slots and token outputs are softmax-weighted blends of all
//!   slot outputs.
//! * [`TopKGate`]: a linear gate scores experts per token, the `k` best are
//!   evaluated and their outputs summed with the gate probabilities.

mod soft;
mod topk;

pub use soft::{combine_outputs, compute_logits, dispatch_weights, route_inputs, SoftMoeRouter};
pub use topk::{select_top_k, topk_from_logits, TopKGate, TopKSelection};

use alloc::vec;
use alloc::vec::Vec;

use crate::config::{ModelConfig, RouterKind};
use crate::error::{Error, Result};
use crate::experts::{Expert, ExpertKind};
use crate::graph::{Graph, Var};
use crate::params::ParamStore;
use crate::rng::Rng;
use crate::scalar::Scalar;

/// Ordered experts; with the mixed configuration the first half are MLP
/// experts and the second half FasterKAN experts.
#[derive(Clone, Debug)]
pub struct ExpertPool {
    experts: Vec<Expert>,
    dim: usize,
}

impl ExpertPool {
    pub fn new<T: Scalar>(prefix: &str, cfg: &ModelConfig, store: &mut ParamStore<T>, rng: &mut Rng) -> Result<Self> {
        cfg.moe.validate()?;
        let experts = (0..cfg.moe.num_experts)
            .map(|i| Expert::for_pool(prefix, i, cfg, store, rng))
            .collect::<Result<Vec<_>>>()?;
        Self::from_experts(experts, cfg.dim)
    }

    pub fn from_experts(experts: Vec<Expert>, dim: usize) -> Result<Self> {
        if experts.is_empty() {
            return Err(Error::config("moe.num_experts", "pool is empty"));
        }
        for e in &experts {
            let (din, dout) = match e {
                Expert::Mlp(m) => (m.dim_in, m.dim_out),
                Expert::FasterKan(k) => (k.dim_in, k.dim_out),
            };
            if din != dim || dout != dim {
                return Err(Error::shape("ExpertPool", &[din, dout], &[dim, dim]));
            }
        }
        Ok(ExpertPool { experts, dim })
    }

    pub fn len(&self) -> usize {
        self.experts.len()
    }

    pub fn is_empty(&self) -> bool {
        self.experts.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn experts(&self) -> &[Expert] {
        &self.experts
    }

    pub fn kinds(&self) -> Vec<ExpertKind> {
        self.experts.iter().map(Expert::kind).collect()
    }
}

#[derive(Clone, Debug)]
pub enum Router {
    Soft(SoftMoeRouter),
    TopK(TopKGate),
}

#[derive(Clone, Debug)]
pub struct MoeOutput {
    pub output: Var,
    /// Number of input rows each expert evaluated.
    pub rows_per_expert: Vec<usize>,
    /// Number of distinct experts whose output reached each token.
    pub experts_per_token: Vec<usize>,
}

#[derive(Clone, Debug)]
pub struct MoeLayer {
    pub pool: ExpertPool,
    pub router: Router,
}

impl MoeLayer {
    pub fn new<T: Scalar>(prefix: &str, cfg: &ModelConfig, store: &mut ParamStore<T>, rng: &mut Rng) -> Result<Self> {
        let pool = ExpertPool::new(&alloc::format!("{prefix}.experts"), cfg, store, rng)?;
        let router = match cfg.moe.router {
            RouterKind::Soft => Router::Soft(SoftMoeRouter::new(
                &alloc::format!("{prefix}.router"),
                cfg.moe.num_experts,
                cfg.moe.slots,
                cfg.dim,
                cfg.moe.norm_mode,
                store,
                rng,
            )),
            RouterKind::Topk => Router::TopK(TopKGate::new(
                &alloc::format!("{prefix}.gate"),
                cfg.dim,
                cfg.moe.num_experts,
                cfg.moe.top_k,
                cfg.moe.renormalize_topk,
                store,
                rng,
            )?),
        };
        Ok(MoeLayer { pool, router })
    }

    /// `[B, N, D] → [B, N, D]`.
    pub fn forward<T: Scalar>(&self, g: &mut Graph<'_, T>, x: Var) -> Result<MoeOutput> {
        moe_forward(&self.pool, &self.router, g, x)
    }
}

pub fn moe_forward<T: Scalar>(pool: &ExpertPool, router: &Router, g: &mut Graph<'_, T>, x: Var) -> Result<MoeOutput> {
    let s = g.shape(x).to_vec();
    if s.len() != 3 || s[2] != pool.dim() {
        return Err(Error::shape("moe_forward", &s, &[0, 0, pool.dim()]));
    }
    match router {
        Router::Soft(r) => soft_forward(pool, r, g, x),
        Router::TopK(gate) => topk_forward(pool, gate, g, x),
    }
}

fn soft_forward<T: Scalar>(pool: &ExpertPool, r: &SoftMoeRouter, g: &mut Graph<'_, T>, x: Var) -> Result<MoeOutput> {
    if r.num_experts() != pool.len() {
        return Err(Error::config("moe.num_experts", "router and pool disagree on expert count"));
    }
    let s = g.shape(x).to_vec();
    let (b, n, d) = (s[0], s[1], s[2]);
    let slots = r.slots();
    let logits = r.compute_logits(g, x)?;
    let alpha = dispatch_weights(g, logits, r.norm_mode())?;
    let z = route_inputs(g, x, alpha)?;
    let mut outs = Vec::with_capacity(pool.len());
    for (e, expert) in pool.experts().iter().enumerate() {
        let ze = g.slice(z, 1, e, 1)?;
        let ze = g.reshape(ze, &[b * slots, d])?;
        let ye = expert.forward(g, ze)?;
        outs.push(g.reshape(ye, &[b, 1, slots, d])?);
    }
    let y = g.concat(&outs, 1)?;
    let output = combine_outputs(g, y, logits)?;
    Ok(MoeOutput {
        output,
        rows_per_expert: vec![b * slots; pool.len()],
        experts_per_token: vec![pool.len(); b * n],
    })
}

fn topk_forward<T: Scalar>(pool: &ExpertPool, gate: &TopKGate, g: &mut Graph<'_, T>, x: Var) -> Result<MoeOutput> {
    if gate.num_experts() != pool.len() {
        return Err(Error::config("moe.num_experts", "gate and pool disagree on expert count"));
    }
    let s = g.shape(x).to_vec();
    let (b, n, d) = (s[0], s[1], s[2]);
    let tokens = b * n;
    let k = gate.k();
    let sel = gate.select(g, x)?;
    let xf = g.reshape(x, &[tokens, d])?;

    let mut parts = Vec::with_capacity(pool.len());
    let mut rows_per_expert = vec![0; pool.len()];
    let mut experts_per_token = vec![0; tokens];
    for (e, expert) in pool.experts().iter().enumerate() {
        let mut rows = Vec::new();
        let mut positions = Vec::new();
        for t in 0..tokens {
            for j in 0..k {
                if sel.indices[t * k + j] == e {
                    rows.push(t);
                    positions.push(t * k + j);
                }
            }
        }
        if rows.is_empty() {
            continue;
        }
        rows_per_expert[e] = rows.len();
        for &t in &rows {
            experts_per_token[t] += 1;
        }
        let xe = g.gather_rows(xf, &rows)?;
        let ye = expert.forward(g, xe)?;
        let we = g.gather_elems(sel.weights, &positions, &[rows.len(), 1])?;
        let ye = g.mul(ye, we)?;
        parts.push((ye, rows));
    }
    let out = g.scatter_add_rows(tokens, d, &parts)?;
    let output = g.reshape(out, &[b, n, d])?;
    Ok(MoeOutput {
        output,
        rows_per_expert,
        experts_per_token,
    })
}
