//! Typed model hyperparameters. Key names in errors match the dotted config
//! keys (`model.dim`, `moe.top_k`, ...).

use alloc::format;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum RouterKind {
    Soft,
    Topk,
}

/// Softmax axes for soft-routing dispatch weights.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum NormMode {
    /// Per token, jointly over (expert, slot).
    Paper,
    /// Per (expert, slot), over tokens.
    Standard,
}

/// Which expert families populate the pool.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ExpertMix {
    /// First half MLP, second half FasterKAN.
    Mixed,
    /// All MLP (baseline).
    Mlp,
    /// All FasterKAN (baseline).
    Kan,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MoeConfig {
    pub num_experts: usize,
    pub slots: usize,
    pub router: RouterKind,
    pub top_k: usize,
    pub norm_mode: NormMode,
    pub renormalize_topk: bool,
    pub experts: ExpertMix,
}

impl Default for MoeConfig {
    fn default() -> Self {
        MoeConfig {
            num_experts: 8,
            slots: 1,
            router: RouterKind::Topk,
            top_k: 2,
            norm_mode: NormMode::Paper,
            renormalize_topk: false,
            experts: ExpertMix::Mixed,
        }
    }
}

impl MoeConfig {
    pub fn validate(&self) -> Result<()> {
        if self.num_experts < 2 || self.num_experts % 2 != 0 {
            return Err(Error::config(
                "moe.num_experts",
                format!("must be even and >= 2 (half MLP, half FasterKAN), got {}", self.num_experts),
            ));
        }
        if self.slots == 0 {
            return Err(Error::config("moe.slots", "must be >= 1"));
        }
        if self.top_k == 0 || self.top_k > self.num_experts {
            return Err(Error::config(
                "moe.top_k",
                format!("must lie in [1, {}], got {}", self.num_experts, self.top_k),
            ));
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct KanConfig {
    pub grid_size: usize,
    pub grid_min: f64,
    pub grid_max: f64,
    /// Basis width; `None` means one grid spacing.
    pub denominator: Option<f64>,
    pub trainable_denominator: bool,
}

impl Default for KanConfig {
    fn default() -> Self {
        KanConfig {
            grid_size: 8,
            grid_min: -2.0,
            grid_max: 2.0,
            denominator: None,
            trainable_denominator: false,
        }
    }
}

impl KanConfig {
    pub fn spacing(&self) -> f64 {
        (self.grid_max - self.grid_min) / (self.grid_size as f64 - 1.0)
    }

    pub fn resolved_denominator(&self) -> f64 {
        self.denominator.unwrap_or_else(|| self.spacing())
    }

    pub fn validate(&self) -> Result<()> {
        if self.grid_size < 2 {
            return Err(Error::config("model.grid_size", "need at least 2 grid points"));
        }
        if !(self.grid_min < self.grid_max) {
            return Err(Error::config("model.grid_min", "grid_min must be < grid_max"));
        }
        if !(self.resolved_denominator() > 0.0) {
            return Err(Error::config("model.denominator", "must be positive"));
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum InputKind {
    /// HWC images, split into square patches.
    Image { height: usize, width: usize, channels: usize },
    /// One token per input variable.
    Scalars { arity: usize },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum HeadKind {
    Classes { count: usize },
    Scalar,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ModelConfig {
    pub dim: usize,
    pub layers: usize,
    pub heads: usize,
    pub patch_size: usize,
    /// Largest stochastic-depth probability (last layer).
    pub p_max: f64,
    /// Dropout on the MoE sublayer output.
    pub dropout: f64,
    /// MLP expert hidden width; `None` means 4·dim.
    pub mlp_hidden: Option<usize>,
    pub ln_eps: f64,
    pub kan: KanConfig,
    pub moe: MoeConfig,
    pub input: InputKind,
    pub head: HeadKind,
}

impl Default for ModelConfig {
    fn default() -> Self {
        ModelConfig {
            dim: 64,
            layers: 12,
            heads: 8,
            patch_size: 4,
            p_max: 0.1,
            dropout: 0.1,
            mlp_hidden: None,
            ln_eps: 1e-5,
            kan: KanConfig::default(),
            moe: MoeConfig::default(),
            input: InputKind::Scalars { arity: 2 },
            head: HeadKind::Scalar,
        }
    }
}

impl ModelConfig {
    pub fn hidden(&self) -> usize {
        self.mlp_hidden.unwrap_or(4 * self.dim)
    }

    pub fn head_dim(&self) -> usize {
        self.dim / self.heads.max(1)
    }

    /// Token count produced by the embedder.
    pub fn num_tokens(&self) -> usize {
        match self.input {
            InputKind::Image { height, width, .. } => (height / self.patch_size) * (width / self.patch_size),
            InputKind::Scalars { arity } => arity,
        }
    }

    /// Linear stochastic-depth schedule: p_max·ℓ/(L−1), layer 0 never dropped.
    pub fn drop_path_prob(&self, layer: usize) -> f64 {
        if self.layers <= 1 {
            0.0
        } else {
            self.p_max * layer as f64 / (self.layers - 1) as f64
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.dim == 0 {
            return Err(Error::config("model.dim", "must be positive"));
        }
        if self.layers == 0 {
            return Err(Error::config("model.layers", "must be positive"));
        }
        if self.heads == 0 || self.dim % self.heads != 0 {
            return Err(Error::config(
                "model.heads",
                format!("model.dim {} is not divisible by {} heads", self.dim, self.heads),
            ));
        }
        if !(0.0..1.0).contains(&self.p_max) {
            return Err(Error::config("model.p_max", "must lie in [0, 1)"));
        }
        if !(0.0..1.0).contains(&self.dropout) {
            return Err(Error::config("model.dropout", "must lie in [0, 1)"));
        }
        if self.hidden() == 0 {
            return Err(Error::config("model.mlp_hidden", "must be positive"));
        }
        if !(self.ln_eps > 0.0) {
            return Err(Error::config("model.ln_eps", "must be positive"));
        }
        match self.input {
            InputKind::Image { height, width, channels } => {
                if self.patch_size == 0 || height % self.patch_size != 0 || width % self.patch_size != 0 {
                    return Err(Error::config(
                        "model.patch_size",
                        format!("{height}x{width} image is not divisible into {0}x{0} patches", self.patch_size),
                    ));
                }
                if channels == 0 {
                    return Err(Error::config("model.channels", "must be positive"));
                }
            }
            InputKind::Scalars { arity } => {
                if arity == 0 {
                    return Err(Error::config("model.arity", "must be positive"));
                }
            }
        }
        if let HeadKind::Classes { count } = self.head {
            if count < 2 {
                return Err(Error::config("model.classes", "need at least 2 classes"));
            }
        }
        self.kan.validate()?;
        self.moe.validate()
    }
}
