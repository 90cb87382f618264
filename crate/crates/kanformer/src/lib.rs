//! Training, benchmarking and file formats for the MLP-KAN mixture-of-experts
//! transformer in [`kanformer_core`].

pub mod bench;
pub mod checkpoint;
pub mod cli;
pub mod dataset;
pub mod error;
pub mod settings;
pub mod train;

pub use error::{Error, Result};
