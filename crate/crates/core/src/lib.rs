//! Core numerics for the MLP-KAN transformer.
//!
//! Everything in this crate is pure computation over `alloc` collections and
//! builds without `std` (disable the default `std` feature). File formats,
//! the training driver, and the command line live in the `kanformer` crate.
//!
//! The pieces, bottom-up:
//!
//! * [`tensor`] and [`graph`]: a dense row-major tensor and a reverse-mode
//!   tape. Every differentiable computation is recorded on a [`Graph`] and
//!   differentiated with [`Graph::backward`].
//! * [`gradcheck`]: central finite differences against the tape.
//! * [`experts`]: SiLU MLP experts, FasterKAN experts built on the
//!   reflectional switch basis, and a Cox-de Boor B-spline evaluator.
//! * [`moe`]: slot-based soft routing and top-K gating over a pool that is
//!   half MLP and half FasterKAN.
//! * [`transformer`]: multi-head attention, the encoder block and the full
//!   encoder with patch / scalar token embedders.
//! * [`data`]: Feynman equation registry and generator, CIFAR record codec,
//!   seeded splits.
//! * [`optim`] and [`metrics`]: AdamW and the evaluation metrics.

#![cfg_attr(not(feature = "std"), no_std)]

extern crate alloc;

pub mod config;
pub mod data;
pub mod error;
pub mod experts;
pub mod gradcheck;
pub mod graph;
pub mod metrics;
pub mod moe;
pub mod optim;
pub mod params;
pub mod rng;
pub mod scalar;
pub mod tensor;
pub mod transformer;

mod kernels;

pub use config::{ExpertMix, ModelConfig, MoeConfig, NormMode, RouterKind};
pub use error::{Error, Result};
pub use graph::{Activation, Gradients, Graph, Mode, OpKind, Var};
pub use params::{ParamId, ParamStore};
pub use rng::Rng;
pub use scalar::Scalar;
pub use tensor::Tensor;
