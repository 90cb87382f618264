use alloc::format;
use alloc::vec::Vec;
use num_traits::Float;

use crate::config::KanConfig;
use crate::error::{Error, Result};
use crate::graph::{Graph, Var};
use crate::params::{ParamId, ParamStore};
use crate::rng::Rng;
use crate::scalar::Scalar;
use crate::tensor::Tensor;

/// 1 − tanh²((x − grid_point) / denominator) for one scalar pair.
pub fn switch_basis(x: f64, grid_point: f64, denominator: f64) -> f64 {
    let t = Float::tanh((x - grid_point) / denominator);
    1.0 - t * t
}

#[derive(Clone, Debug, PartialEq)]
pub enum Denominator {
    Fixed(f64),
    Trainable(ParamId),
}

/// FasterKAN function expert:
/// `y = W_spline · flatten(φ(LayerNorm(x)))`.
///
/// The basis tensor `[.., D, G]` is flattened feature-major, grid-minor:
/// row `d·G + j` of `W_spline` weighs feature `d` against grid point `j`.
#[derive(Clone, Debug)]
pub struct FasterKanLayer {
    pub grid: Vec<f64>,
    pub denominator: Denominator,
    pub w_spline: ParamId,
    pub ln_gain: ParamId,
    pub ln_bias: ParamId,
    pub eps: f64,
    pub dim_in: usize,
    pub dim_out: usize,
}

impl FasterKanLayer {
    pub fn new<T: Scalar>(
        prefix: &str,
        dim_in: usize,
        dim_out: usize,
        cfg: &KanConfig,
        eps: f64,
        store: &mut ParamStore<T>,
        rng: &mut Rng,
    ) -> Result<Self> {
        cfg.validate()?;
        let step = cfg.spacing();
        let grid: Vec<f64> = (0..cfg.grid_size).map(|j| cfg.grid_min + step * j as f64).collect();
        Self::with_grid(
            prefix,
            dim_in,
            dim_out,
            grid,
            cfg.resolved_denominator(),
            cfg.trainable_denominator,
            eps,
            store,
            rng,
        )
    }

    /// W_spline ~ U(±1/sqrt(D·G)); LayerNorm gain 1, bias 0.
    #[allow(clippy::too_many_arguments)]
    pub fn with_grid<T: Scalar>(
        prefix: &str,
        dim_in: usize,
        dim_out: usize,
        grid: Vec<f64>,
        denominator: f64,
        trainable_denominator: bool,
        eps: f64,
        store: &mut ParamStore<T>,
        rng: &mut Rng,
    ) -> Result<Self> {
        if grid.len() < 2 || grid.windows(2).any(|w| !(w[0] < w[1])) {
            return Err(Error::contract("FasterKanLayer", "grid must have >= 2 strictly increasing points"));
        }
        if !(denominator > 0.0) {
            return Err(Error::contract("FasterKanLayer", "denominator must be positive"));
        }
        let rows = dim_in * grid.len();
        let bound = 1.0 / (rows as f64).sqrt();
        let ln_gain = store.add_ones(format!("{prefix}.kan.ln_gain"), &[dim_in]);
        let ln_bias = store.add_zeros(format!("{prefix}.kan.ln_bias"), &[dim_in]);
        let w_spline = store.add_uniform(format!("{prefix}.kan.w_spline"), &[rows, dim_out], bound, rng);
        let denominator = if trainable_denominator {
            Denominator::Trainable(store.add(
                format!("{prefix}.kan.denominator"),
                Tensor::from_fn([1], |_| T::of_f64(denominator)),
            ))
        } else {
            Denominator::Fixed(denominator)
        };
        Ok(FasterKanLayer {
            grid,
            denominator,
            w_spline,
            ln_gain,
            ln_bias,
            eps,
            dim_in,
            dim_out,
        })
    }

    pub fn forward<T: Scalar>(&self, g: &mut Graph<'_, T>, x: Var) -> Result<Var> {
        let shape = g.shape(x).to_vec();
        if shape.last() != Some(&self.dim_in) {
            return Err(Error::shape("fasterkan_forward", &shape, &[self.dim_in]));
        }
        let gain = g.param(self.ln_gain);
        let bias = g.param(self.ln_bias);
        let xn = g.layer_norm(x, gain, bias, self.eps)?;
        let den = match self.denominator {
            Denominator::Fixed(d) => g.constant(Tensor::from_fn([1], |_| T::of_f64(d))),
            Denominator::Trainable(id) => g.param(id),
        };
        let grid: Vec<T> = self.grid.iter().map(|&v| T::of_f64(v)).collect();
        let phi = g.reflectional_switch(xn, &grid, den)?;
        let tokens: usize = shape[..shape.len() - 1].iter().product();
        let flat = g.reshape(phi, &[tokens, self.dim_in * self.grid.len()])?;
        let w = g.param(self.w_spline);
        let y = g.matmul(flat, w)?;
        let mut out_shape = shape;
        *out_shape.last_mut().expect("rank >= 1") = self.dim_out;
        g.reshape(y, &out_shape)
    }
}
