use alloc::format;

use crate::error::{Error, Result};
use crate::graph::{Graph, Var};
use crate::params::{ParamId, ParamStore};
use crate::rng::Rng;
use crate::scalar::Scalar;
#[cfg(not(feature = "std"))]
use num_traits::Float;

/// `W2 · SiLU(W1 · x + b1) + b2`, applied to every token independently.
#[derive(Clone, Debug)]
pub struct MlpExpert {
    pub w1: ParamId,
    pub b1: ParamId,
    pub w2: ParamId,
    pub b2: ParamId,
    pub dim_in: usize,
    pub hidden: usize,
    pub dim_out: usize,
}

impl MlpExpert {
    /// Weights ~ U(±1/sqrt(fan_in)), biases zero.
    pub fn new<T: Scalar>(
        prefix: &str,
        dim_in: usize,
        hidden: usize,
        dim_out: usize,
        store: &mut ParamStore<T>,
        rng: &mut Rng,
    ) -> Self {
        let b_in = 1.0 / (dim_in as f64).sqrt();
        let b_hid = 1.0 / (hidden as f64).sqrt();
        MlpExpert {
            w1: store.add_uniform(format!("{prefix}.mlp.w1"), &[dim_in, hidden], b_in, rng),
            b1: store.add_zeros(format!("{prefix}.mlp.b1"), &[hidden]),
            w2: store.add_uniform(format!("{prefix}.mlp.w2"), &[hidden, dim_out], b_hid, rng),
            b2: store.add_zeros(format!("{prefix}.mlp.b2"), &[dim_out]),
            dim_in,
            hidden,
            dim_out,
        }
    }

    pub fn forward<T: Scalar>(&self, g: &mut Graph<'_, T>, x: Var) -> Result<Var> {
        let shape = g.shape(x).to_vec();
        if shape.last() != Some(&self.dim_in) {
            return Err(Error::shape("mlp_expert_forward", &shape, &[self.dim_in]));
        }
        let x = if shape.len() == 1 { g.reshape(x, &[1, self.dim_in])? } else { x };
        let w1 = g.param(self.w1);
        let b1 = g.param(self.b1);
        let w2 = g.param(self.w2);
        let b2 = g.param(self.b2);
        let h = g.matmul(x, w1)?;
        let h = g.add(h, b1)?;
        let h = g.silu(h);
        let y = g.matmul(h, w2)?;
        let y = g.add(y, b2)?;
        if shape.len() == 1 {
            g.reshape(y, &[self.dim_out])
        } else {
            Ok(y)
        }
    }
}
