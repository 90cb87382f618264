#![allow(dead_code)]

use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use kanformer::dataset::cifar_files;
use kanformer_core::data::{encode_cifar, CifarVariant, LabeledImage};
use kanformer_core::{Rng, Tensor};

pub fn kanformer(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_kanformer"))
        .args(args)
        .env("KANFORMER_THREADS", "1")
        .output()
        .expect("binary runs")
}

pub fn code(out: &Output) -> i32 {
    out.status.code().expect("exited normally")
}

pub fn stderr(out: &Output) -> String {
    String::from_utf8_lossy(&out.stderr).into_owned()
}

pub fn stdout(out: &Output) -> String {
    String::from_utf8_lossy(&out.stdout).into_owned()
}

/// Images whose per-class brightness differs, so a model has something to
/// learn; pixels are multiples of 1/255 so they survive encoding.
pub fn synthetic_images(n: usize, variant: CifarVariant, seed: u64) -> Vec<LabeledImage> {
    let mut rng = Rng::new(seed);
    let classes = variant.classes();
    (0..n)
        .map(|i| {
            let label = i % classes;
            let base = 40 + (label * 170) / classes;
            let pixels = Tensor::from_fn([32, 32, 3], |_| (base + rng.below(40)) as f32 / 255.0);
            LabeledImage {
                pixels,
                label,
                coarse_label: (variant == CifarVariant::Cifar100).then_some(label / 5),
            }
        })
        .collect()
}

/// A directory laid out like the official binary release.
pub fn write_cifar_fixture(dir: &Path, variant: CifarVariant, per_train_file: usize, test: usize) -> PathBuf {
    std::fs::create_dir_all(dir).unwrap();
    let (train_files, test_file) = cifar_files(variant);
    for (i, f) in train_files.iter().enumerate() {
        let bytes = encode_cifar(&synthetic_images(per_train_file, variant, 100 + i as u64), variant).unwrap();
        std::fs::write(dir.join(f), bytes).unwrap();
    }
    let bytes = encode_cifar(&synthetic_images(test, variant, 99), variant).unwrap();
    std::fs::write(dir.join(test_file), bytes).unwrap();
    dir.to_path_buf()
}
