//! Datasets: the Feynman equation generator, the CIFAR binary record codec
//! and seeded train/test splits.

mod cifar;
mod feynman;
mod split;

pub use cifar::{decode_cifar, encode_cifar, standardize, CifarVariant, LabeledImage, CIFAR10_MEAN, CIFAR10_STD};
pub use feynman::{feynman_generate, feynman_registry, feynman_spec, FeynmanData, FeynmanSpec, VarRange};
pub use split::{make_split, SplitDataset};
