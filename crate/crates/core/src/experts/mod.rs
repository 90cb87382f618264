//! Expert networks: SiLU MLP representation experts and FasterKAN function
//! experts, plus the B-spline basis used as a reference spline family.

mod bspline;
mod fasterkan;
mod mlp;

pub use bspline::{bspline_eval, BSplineBasis};
pub use fasterkan::{switch_basis, Denominator, FasterKanLayer};
pub use mlp::MlpExpert;

use alloc::string::String;

use crate::config::{ExpertMix, ModelConfig};
use crate::error::Result;
use crate::graph::{Graph, Var};
use crate::params::ParamStore;
use crate::rng::Rng;
use crate::scalar::Scalar;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ExpertKind {
    Mlp,
    FasterKan,
}

#[derive(Clone, Debug)]
pub enum Expert {
    Mlp(MlpExpert),
    FasterKan(FasterKanLayer),
}

impl Expert {
    pub fn kind(&self) -> ExpertKind {
        match self {
            Expert::Mlp(_) => ExpertKind::Mlp,
            Expert::FasterKan(_) => ExpertKind::FasterKan,
        }
    }

    pub fn forward<T: Scalar>(&self, g: &mut Graph<'_, T>, x: Var) -> Result<Var> {
        match self {
            Expert::Mlp(e) => e.forward(g, x),
            Expert::FasterKan(e) => e.forward(g, x),
        }
    }

    /// Zero the output map so the expert returns zeros (MLP keeps its
    /// output bias, which is already zero-initialised).
    pub fn zero_output<T: Scalar>(&self, store: &mut ParamStore<T>) {
        let id = match self {
            Expert::Mlp(e) => e.w2,
            Expert::FasterKan(e) => e.w_spline,
        };
        store.get_mut(id).data_mut().iter_mut().for_each(|v| *v = T::zero());
        if let Expert::Mlp(e) = self {
            store.get_mut(e.b2).data_mut().iter_mut().for_each(|v| *v = T::zero());
        }
    }

    /// Build expert `index` of a pool of `cfg.moe.num_experts`.
    pub fn for_pool<T: Scalar>(
        prefix: &str,
        index: usize,
        cfg: &ModelConfig,
        store: &mut ParamStore<T>,
        rng: &mut Rng,
    ) -> Result<Expert> {
        let ne = cfg.moe.num_experts;
        let kind = match cfg.moe.experts {
            ExpertMix::Mixed if index < ne / 2 => ExpertKind::Mlp,
            ExpertMix::Mixed => ExpertKind::FasterKan,
            ExpertMix::Mlp => ExpertKind::Mlp,
            ExpertMix::Kan => ExpertKind::FasterKan,
        };
        let name: String = alloc::format!("{prefix}.{index}");
        Ok(match kind {
            ExpertKind::Mlp => Expert::Mlp(MlpExpert::new(&name, cfg.dim, cfg.hidden(), cfg.dim, store, rng)),
            ExpertKind::FasterKan => Expert::FasterKan(FasterKanLayer::new(&name, cfg.dim, cfg.dim, &cfg.kan, cfg.ln_eps, store, rng)?),
        })
    }
}
