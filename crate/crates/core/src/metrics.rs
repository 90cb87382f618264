//! Evaluation metrics over plain slices.

use alloc::format;
use alloc::vec;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::moe::select_top_k;
#[cfg(not(feature = "std"))]
use num_traits::Float;

/// Root mean squared error.
pub fn rmse(pred: &[f64], target: &[f64]) -> Result<f64> {
    if pred.is_empty() {
        return Err(Error::contract("evaluate_rmse", "empty dataset"));
    }
    if pred.len() != target.len() {
        return Err(Error::shape("evaluate_rmse", &[pred.len()], &[target.len()]));
    }
    let se: f64 = pred.iter().zip(target).map(|(p, t)| (p - t) * (p - t)).sum();
    Ok((se / pred.len() as f64).sqrt())
}

/// Running minimum of validation RMSE across epochs.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct RmseTracker {
    pub lowest: Option<f64>,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct RmseReport {
    pub rmse: f64,
    pub lowest_so_far: f64,
}

impl RmseTracker {
    pub fn update(&mut self, rmse: f64) -> RmseReport {
        let lowest = self.lowest.map_or(rmse, |l| l.min(rmse));
        self.lowest = Some(lowest);
        RmseReport {
            rmse,
            lowest_so_far: lowest,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ClassificationReport {
    pub acc1: f64,
    pub acc5: f64,
    pub f1_macro: f64,
}

/// Fraction of rows whose label is among the `k` largest logits. Ties are
/// resolved toward the lower class index.
pub fn top_k_accuracy(logits: &[f64], classes: usize, labels: &[usize], k: usize) -> Result<f64> {
    check_logits(logits, classes, labels)?;
    if k == 0 || k > classes {
        return Err(Error::contract("top_k_accuracy", format!("k = {k} with {classes} classes")));
    }
    let hits = logits
        .chunks(classes)
        .zip(labels)
        .filter(|(row, &y)| select_top_k(row, k).contains(&y))
        .count();
    Ok(hits as f64 / labels.len() as f64)
}

/// Macro-averaged F1 of argmax predictions. A class that is never
/// predicted and never present scores 0.
pub fn macro_f1(logits: &[f64], classes: usize, labels: &[usize]) -> Result<f64> {
    check_logits(logits, classes, labels)?;
    let mut tp = vec![0usize; classes];
    let mut fp = vec![0usize; classes];
    let mut fn_ = vec![0usize; classes];
    for (row, &y) in logits.chunks(classes).zip(labels) {
        let p = select_top_k(row, 1)[0];
        if p == y {
            tp[y] += 1;
        } else {
            fp[p] += 1;
            fn_[y] += 1;
        }
    }
    let f1: f64 = (0..classes)
        .map(|c| {
            let denom = 2 * tp[c] + fp[c] + fn_[c];
            if denom == 0 {
                0.0
            } else {
                2.0 * tp[c] as f64 / denom as f64
            }
        })
        .sum();
    Ok(f1 / classes as f64)
}

/// Top-1, top-5 (top-`classes` when there are fewer than five) and macro F1.
pub fn classification_report(logits: &[f64], classes: usize, labels: &[usize]) -> Result<ClassificationReport> {
    Ok(ClassificationReport {
        acc1: top_k_accuracy(logits, classes, labels, 1)?,
        acc5: top_k_accuracy(logits, classes, labels, classes.min(5))?,
        f1_macro: macro_f1(logits, classes, labels)?,
    })
}

fn check_logits(logits: &[f64], classes: usize, labels: &[usize]) -> Result<()> {
    if labels.is_empty() {
        return Err(Error::contract("evaluate_classification", "empty dataset"));
    }
    if classes == 0 || logits.len() != labels.len() * classes {
        return Err(Error::shape("evaluate_classification", &[logits.len()], &[labels.len(), classes]));
    }
    if let Some(&y) = labels.iter().find(|&&y| y >= classes) {
        return Err(Error::contract("evaluate_classification", format!("label {y} with {classes} classes")));
    }
    Ok(())
}
