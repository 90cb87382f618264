use alloc::format;
use alloc::vec::Vec;

use crate::config::ModelConfig;
use crate::error::{Error, Result};
use crate::graph::{Graph, Mode, Var};
use crate::moe::MoeLayer;
use crate::params::{ParamId, ParamStore};
use crate::rng::Rng;
use crate::scalar::Scalar;
use crate::tensor::Tensor;

use super::MultiHeadAttention;

#[derive(Clone, Copy, Debug)]
pub struct LayerNormParams {
    pub gain: ParamId,
    pub bias: ParamId,
    pub eps: f64,
}

impl LayerNormParams {
    pub fn new<T: Scalar>(prefix: &str, dim: usize, eps: f64, store: &mut ParamStore<T>) -> Self {
        LayerNormParams {
            gain: store.add_ones(format!("{prefix}.gain"), &[dim]),
            bias: store.add_zeros(format!("{prefix}.bias"), &[dim]),
            eps,
        }
    }

    pub fn forward<T: Scalar>(&self, g: &mut Graph<'_, T>, x: Var) -> Result<Var> {
        let gain = g.param(self.gain);
        let bias = g.param(self.bias);
        g.layer_norm(x, gain, bias, self.eps)
    }
}

/// `Y = X + A + F(LN₂(X + A))` with `A = MHA(LN₁(X))` and `F` the MoE
/// sublayer followed by dropout.
#[derive(Clone, Debug)]
pub struct EncoderBlock {
    pub mha: MultiHeadAttention,
    pub moe: MoeLayer,
    pub ln1: LayerNormParams,
    pub ln2: LayerNormParams,
    pub drop_path_prob: f64,
    pub dropout_prob: f64,
}

impl EncoderBlock {
    pub fn new<T: Scalar>(prefix: &str, cfg: &ModelConfig, drop_path_prob: f64, store: &mut ParamStore<T>, rng: &mut Rng) -> Result<Self> {
        if !(0.0..1.0).contains(&drop_path_prob) {
            return Err(Error::config("model.p_max", format!("drop-path probability {drop_path_prob} outside [0, 1)")));
        }
        Ok(EncoderBlock {
            ln1: LayerNormParams::new(&format!("{prefix}.ln1"), cfg.dim, cfg.ln_eps, store),
            mha: MultiHeadAttention::new(&format!("{prefix}.mha"), cfg.dim, cfg.heads, store, rng)?,
            ln2: LayerNormParams::new(&format!("{prefix}.ln2"), cfg.dim, cfg.ln_eps, store),
            moe: MoeLayer::new(&format!("{prefix}.moe"), cfg, store, rng)?,
            drop_path_prob,
            dropout_prob: cfg.dropout,
        })
    }

    pub fn forward<T: Scalar>(&self, g: &mut Graph<'_, T>, x: Var, mode: Mode, rng: &mut Rng) -> Result<Var> {
        let h = self.ln1.forward(g, x)?;
        let a = self.mha.forward(g, h)?;
        let a = stochastic_depth(g, a, self.drop_path_prob, mode, rng)?;
        let xa = g.add(x, a)?;
        let h2 = self.ln2.forward(g, xa)?;
        let f = self.moe.forward(g, h2)?.output;
        let f = dropout(g, f, self.dropout_prob, mode, rng)?;
        let f = stochastic_depth(g, f, self.drop_path_prob, mode, rng)?;
        g.add(xa, f)
    }
}

fn check_prob(key: &'static str, p: f64) -> Result<()> {
    if !(0.0..1.0).contains(&p) {
        return Err(Error::config(key, format!("probability {p} outside [0, 1)")));
    }
    Ok(())
}

/// Drop the whole branch per sample with probability `p`, scaling kept
/// samples by `1/(1−p)`. Identity in eval mode.
pub fn stochastic_depth<T: Scalar>(g: &mut Graph<'_, T>, x: Var, p: f64, mode: Mode, rng: &mut Rng) -> Result<Var> {
    check_prob("model.p_max", p)?;
    if mode == Mode::Eval || p == 0.0 {
        return Ok(x);
    }
    let shape = g.shape(x).to_vec();
    let mut mshape = Vec::with_capacity(shape.len());
    mshape.push(shape.first().copied().unwrap_or(1));
    mshape.resize(shape.len().max(1), 1);
    let keep = T::of_f64(1.0 / (1.0 - p));
    let mask = Tensor::from_fn(mshape, |_| if rng.bernoulli(p) { T::zero() } else { keep });
    let m = g.constant(mask);
    g.mul(x, m)
}

/// Inverted elementwise dropout. Identity in eval mode.
pub fn dropout<T: Scalar>(g: &mut Graph<'_, T>, x: Var, p: f64, mode: Mode, rng: &mut Rng) -> Result<Var> {
    check_prob("model.dropout", p)?;
    if mode == Mode::Eval || p == 0.0 {
        return Ok(x);
    }
    let keep = T::of_f64(1.0 / (1.0 - p));
    let mask = Tensor::from_fn(g.shape(x), |_| if rng.bernoulli(p) { T::zero() } else { keep });
    let m = g.constant(mask);
    g.mul(x, m)
}
