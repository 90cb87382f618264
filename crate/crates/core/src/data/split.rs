use alloc::string::String;
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::rng::Rng;
#[cfg(not(feature = "std"))]
use num_traits::Float;

#[derive(Clone, Debug, PartialEq)]
pub struct SplitDataset<S> {
    pub train: Vec<S>,
    pub test: Vec<S>,
    /// Source positions of the training samples, in split order.
    pub train_indices: Vec<usize>,
    pub test_indices: Vec<usize>,
    pub seed: u64,
    /// Identifies the data the split was drawn from; set by the loader.
    pub source: Option<String>,
}

/// Seeded shuffle, then the first `round(n·test_fraction)` samples
/// (at least one, at most n − 1) become the test set.
pub fn make_split<S: Clone>(samples: &[S], test_fraction: f64, seed: u64) -> Result<SplitDataset<S>> {
    let n = samples.len();
    if n < 2 {
        return Err(Error::contract("make_split", "need at least two samples"));
    }
    if !(test_fraction > 0.0 && test_fraction < 1.0) {
        return Err(Error::config("data.test_fraction", "must lie strictly between 0 and 1"));
    }
    let n_test = ((n as f64 * test_fraction).round() as usize).clamp(1, n - 1);
    let mut order: Vec<usize> = (0..n).collect();
    Rng::new(seed).shuffle(&mut order);
    let test_indices = order[..n_test].to_vec();
    let train_indices = order[n_test..].to_vec();
    Ok(SplitDataset {
        train: train_indices.iter().map(|&i| samples[i].clone()).collect(),
        test: test_indices.iter().map(|&i| samples[i].clone()).collect(),
        train_indices,
        test_indices,
        seed,
        source: None,
    })
}
