use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec::Vec;

#[cfg(not(feature = "std"))]
use num_traits::Float;

use crate::error::{Error, Result};
use crate::rng::Rng;
use crate::tensor::Tensor;

const RANGES: &str = include_str!("feynman_ranges.tsv");

#[derive(Clone, Debug, PartialEq)]
pub struct VarRange {
    pub name: String,
    pub low: f64,
    pub high: f64,
}

/// One registered equation with its sampling box.
#[derive(Clone, Debug)]
pub struct FeynmanSpec {
    pub id: &'static str,
    pub formula: &'static str,
    pub ranges: Vec<VarRange>,
    evaluate: fn(&[f64]) -> f64,
}

impl FeynmanSpec {
    pub fn arity(&self) -> usize {
        self.ranges.len()
    }

    pub fn variables(&self) -> impl Iterator<Item = &str> {
        self.ranges.iter().map(|r| r.name.as_str())
    }

    /// Evaluate at a point given in variable order.
    pub fn evaluate(&self, x: &[f64]) -> Result<f64> {
        if x.len() != self.arity() {
            return Err(Error::shape("feynman_evaluate", &[x.len()], &[self.arity()]));
        }
        Ok((self.evaluate)(x))
    }
}

type Entry = (&'static str, &'static str, fn(&[f64]) -> f64);

fn rel_gamma(v: f64, c: f64) -> f64 {
    (1.0 - v * v / (c * c)).sqrt()
}

const EQUATIONS: [Entry; 30] = [
    ("I.6.20a", "exp(-theta^2/2)/sqrt(2 pi)", |x| (-x[0] * x[0] / 2.0).exp() / (2.0 * core::f64::consts::PI).sqrt()),
    ("I.6.20", "exp(-theta^2/(2 sigma^2))/sqrt(2 pi sigma^2)", |x| {
        let s2 = x[1] * x[1];
        (-x[0] * x[0] / (2.0 * s2)).exp() / (2.0 * core::f64::consts::PI * s2).sqrt()
    }),
    ("I.6.20b", "exp(-(theta-theta1)^2/(2 sigma^2))/sqrt(2 pi sigma^2)", |x| {
        let s2 = x[2] * x[2];
        let d = x[0] - x[1];
        (-d * d / (2.0 * s2)).exp() / (2.0 * core::f64::consts::PI * s2).sqrt()
    }),
    ("I.8.4", "sqrt((x2-x1)^2+(y2-y1)^2)", |x| ((x[1] - x[0]).powi(2) + (x[3] - x[2]).powi(2)).sqrt()),
    ("I.9.18", "G m1 m2/((x2-x1)^2+(y2-y1)^2+(z2-z1)^2)", |x| {
        x[0] * x[1] * x[2] / ((x[4] - x[3]).powi(2) + (x[6] - x[5]).powi(2) + (x[8] - x[7]).powi(2))
    }),
    ("I.10.7", "m0/sqrt(1-v^2/c^2)", |x| x[0] / rel_gamma(x[1], x[2])),
    ("I.11.19", "x1 y1+x2 y2+x3 y3", |x| x[0] * x[1] + x[2] * x[3] + x[4] * x[5]),
    ("I.12.1", "mu Nn", |x| x[0] * x[1]),
    ("I.12.2", "q1 q2/(4 pi epsilon r^2)", |x| x[0] * x[1] / (4.0 * core::f64::consts::PI * x[2] * x[3] * x[3])),
    ("I.12.4", "q1/(4 pi epsilon r^2)", |x| x[0] / (4.0 * core::f64::consts::PI * x[1] * x[2] * x[2])),
    ("I.12.5", "q2 Ef", |x| x[0] * x[1]),
    ("I.12.11", "q (Ef+B v sin(theta))", |x| x[0] * (x[1] + x[2] * x[3] * x[4].sin())),
    ("I.13.4", "m (v^2+u^2+w^2)/2", |x| 0.5 * x[0] * (x[1] * x[1] + x[2] * x[2] + x[3] * x[3])),
    ("I.13.12", "G m1 m2 (1/r2-1/r1)", |x| x[0] * x[1] * x[2] * (1.0 / x[4] - 1.0 / x[3])),
    ("I.14.3", "m g z", |x| x[0] * x[1] * x[2]),
    ("I.14.4", "ks x^2/2", |x| 0.5 * x[0] * x[1] * x[1]),
    ("I.15.3x", "(x-u t)/sqrt(1-u^2/c^2)", |x| (x[0] - x[1] * x[2]) / rel_gamma(x[1], x[3])),
    ("I.15.3t", "(t-u x/c^2)/sqrt(1-u^2/c^2)", |x| (x[0] - x[1] * x[2] / (x[3] * x[3])) / rel_gamma(x[1], x[3])),
    ("I.15.10", "m0 v/sqrt(1-v^2/c^2)", |x| x[0] * x[1] / rel_gamma(x[1], x[2])),
    ("I.16.6", "(u+v)/(1+u v/c^2)", |x| (x[0] + x[1]) / (1.0 + x[0] * x[1] / (x[2] * x[2]))),
    ("I.18.4", "(m1 r1+m2 r2)/(m1+m2)", |x| (x[0] * x[1] + x[2] * x[3]) / (x[0] + x[2])),
    ("I.18.5", "r F sin(theta)", |x| x[0] * x[1] * x[2].sin()),
    ("I.18.16", "m r v sin(theta)", |x| x[0] * x[1] * x[2] * x[3].sin()),
    ("I.24.6", "m (omega^2+omega0^2) x^2/4", |x| 0.25 * x[0] * (x[1] * x[1] + x[2] * x[2]) * x[3] * x[3]),
    ("I.25.13", "q/C", |x| x[0] / x[1]),
    ("I.26.2", "arcsin(n sin(theta2))", |x| (x[0] * x[1].sin()).asin()),
    ("I.27.6", "1/(1/d1+n/d2)", |x| 1.0 / (1.0 / x[0] + x[2] / x[1])),
    ("I.29.4", "omega/c", |x| x[0] / x[1]),
    ("I.29.16", "sqrt(x1^2+x2^2-2 x1 x2 cos(theta1-theta2))", |x| {
        // the radicand is a squared distance; clamp rounding below zero
        (x[0] * x[0] + x[1] * x[1] - 2.0 * x[0] * x[1] * (x[2] - x[3]).cos()).max(0.0).sqrt()
    }),
    ("I.30.3", "I0 sin^2(n theta/2)/sin^2(theta/2)", |x| {
        let num = (x[1] * x[2] / 2.0).sin();
        let den = (x[2] / 2.0).sin();
        x[0] * num * num / (den * den)
    }),
];

fn parse_ranges() -> Result<Vec<(String, VarRange)>> {
    let mut out = Vec::new();
    for (lineno, line) in RANGES.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let cols: Vec<&str> = line.split('\t').collect();
        let bad = || Error::Format(format!("feynman range table line {}: {line:?}", lineno + 1));
        if cols.len() != 4 {
            return Err(bad());
        }
        let low: f64 = cols[2].parse().map_err(|_| bad())?;
        let high: f64 = cols[3].parse().map_err(|_| bad())?;
        if !(low < high) {
            return Err(bad());
        }
        out.push((
            cols[0].to_string(),
            VarRange {
                name: cols[1].to_string(),
                low,
                high,
            },
        ));
    }
    Ok(out)
}

/// All registered equations in table order.
pub fn feynman_registry() -> Vec<FeynmanSpec> {
    let table = parse_ranges().expect("bundled range table is well formed");
    EQUATIONS
        .iter()
        .map(|&(id, formula, evaluate)| FeynmanSpec {
            id,
            formula,
            ranges: table.iter().filter(|(i, _)| i == id).map(|(_, r)| r.clone()).collect(),
            evaluate,
        })
        .collect()
}

pub fn feynman_spec(id: &str) -> Result<FeynmanSpec> {
    feynman_registry().into_iter().find(|s| s.id == id).ok_or_else(|| {
        let known: Vec<&str> = EQUATIONS.iter().map(|e| e.0).collect();
        Error::config("train.task", format!("unknown Feynman equation {id:?}; known: {}", known.join(", ")))
    })
}

#[derive(Clone, Debug, PartialEq)]
pub struct FeynmanData {
    /// `[n, arity]`
    pub inputs: Tensor<f64>,
    /// `[n]`
    pub targets: Tensor<f64>,
}

/// Draw `n` points uniformly from the equation's box, variables in table
/// order, one sample after another.
pub fn feynman_generate(spec: &FeynmanSpec, n: usize, seed: u64) -> Result<FeynmanData> {
    if n == 0 {
        return Err(Error::contract("feynman_generate", "n must be at least 1"));
    }
    let a = spec.arity();
    let mut rng = Rng::new(seed);
    let mut inputs = Vec::with_capacity(n * a);
    let mut targets = Vec::with_capacity(n);
    for i in 0..n {
        let start = inputs.len();
        for r in &spec.ranges {
            inputs.push(rng.uniform(r.low, r.high));
        }
        let y = (spec.evaluate)(&inputs[start..]);
        if !y.is_finite() {
            return Err(Error::NonFinite(format!(
                "{} sample {i} at {:?} evaluates to {y}",
                spec.id,
                &inputs[start..]
            )));
        }
        targets.push(y);
    }
    Ok(FeynmanData {
        inputs: Tensor::new([n, a], inputs)?,
        targets: Tensor::new([n], targets)?,
    })
}
