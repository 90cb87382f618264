use alloc::format;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::tensor::Tensor;

const SIDE: usize = 32;
const PLANE: usize = SIDE * SIDE;
const PIXELS: usize = 3 * PLANE;

pub const CIFAR10_MEAN: [f32; 3] = [0.4914, 0.4822, 0.4465];
pub const CIFAR10_STD: [f32; 3] = [0.2470, 0.2435, 0.2616];

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CifarVariant {
    Cifar10,
    Cifar100,
}

impl CifarVariant {
    pub fn label_bytes(self) -> usize {
        match self {
            CifarVariant::Cifar10 => 1,
            CifarVariant::Cifar100 => 2,
        }
    }

    pub fn record_len(self) -> usize {
        self.label_bytes() + PIXELS
    }

    /// Number of (fine) classes.
    pub fn classes(self) -> usize {
        match self {
            CifarVariant::Cifar10 => 10,
            CifarVariant::Cifar100 => 100,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct LabeledImage {
    /// `[32, 32, 3]`, values `byte / 255`.
    pub pixels: Tensor<f32>,
    pub label: usize,
    /// CIFAR-100 only.
    pub coarse_label: Option<usize>,
}

/// Parse concatenated records: label byte(s), then the red, green and blue
/// planes, each 32 rows of 32 bytes.
pub fn decode_cifar(bytes: &[u8], variant: CifarVariant) -> Result<Vec<LabeledImage>> {
    let rec = variant.record_len();
    if bytes.len() % rec != 0 {
        return Err(Error::Format(format!(
            "CIFAR file length {} is not a multiple of the {rec}-byte record (expected {} bytes for {} records)",
            bytes.len(),
            (bytes.len() / rec) * rec,
            bytes.len() / rec
        )));
    }
    bytes
        .chunks_exact(rec)
        .enumerate()
        .map(|(i, r)| {
            let (coarse, label) = match variant {
                CifarVariant::Cifar10 => (None, r[0] as usize),
                CifarVariant::Cifar100 => (Some(r[0] as usize), r[1] as usize),
            };
            if label >= variant.classes() {
                return Err(Error::Format(format!("record {i}: label {label} outside 0..{}", variant.classes())));
            }
            if let Some(c) = coarse.filter(|&c| c >= 20) {
                return Err(Error::Format(format!("record {i}: coarse label {c} outside 0..20")));
            }
            let px = &r[variant.label_bytes()..];
            let mut hwc = Vec::with_capacity(PIXELS);
            for p in 0..PLANE {
                for c in 0..3 {
                    hwc.push(px[c * PLANE + p] as f32 / 255.0);
                }
            }
            Ok(LabeledImage {
                pixels: Tensor::new([SIDE, SIDE, 3], hwc)?,
                label,
                coarse_label: coarse,
            })
        })
        .collect()
}

/// Inverse of [`decode_cifar`] for images whose pixels are multiples of
/// 1/255.
pub fn encode_cifar(images: &[LabeledImage], variant: CifarVariant) -> Result<Vec<u8>> {
    let mut out = Vec::with_capacity(images.len() * variant.record_len());
    for (i, img) in images.iter().enumerate() {
        if img.pixels.shape() != [SIDE, SIDE, 3] {
            return Err(Error::shape("encode_cifar", img.pixels.shape(), &[SIDE, SIDE, 3]));
        }
        if img.label >= variant.classes() {
            return Err(Error::Format(format!("image {i}: label {} outside 0..{}", img.label, variant.classes())));
        }
        if variant == CifarVariant::Cifar100 {
            out.push(img.coarse_label.unwrap_or(0) as u8);
        }
        out.push(img.label as u8);
        let px = img.pixels.data();
        for c in 0..3 {
            for p in 0..PLANE {
                let v = px[p * 3 + c];
                if !(0.0..=1.0).contains(&v) {
                    return Err(Error::Format(format!("image {i}: pixel value {v} outside [0, 1]")));
                }
                out.push(num_traits::Float::round(v * 255.0) as u8);
            }
        }
    }
    Ok(out)
}

/// Per-channel `(x − mean) / std` over `[.., 3]` HWC data, in place.
pub fn standardize(pixels: &mut [f32], mean: [f32; 3], std: [f32; 3]) {
    for px in pixels.chunks_exact_mut(3) {
        for c in 0..3 {
            px[c] = (px[c] - mean[c]) / std[c];
        }
    }
}
