//! The named finite-difference targets behind the `gradcheck` command.
//!
//! Each target draws its point from `seed` and differentiates
//! `Σ out ⊙ probe` for a fixed random probe, so every output element
//! contributes to the checked gradient.

use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use super::{gradcheck_params, GradcheckOptions, GradcheckReport};
use crate::config::{InputKind, KanConfig, ModelConfig, NormMode, RouterKind};
use crate::error::{Error, Result};
use crate::experts::{FasterKanLayer, MlpExpert};
use crate::graph::{Graph, Mode, Var};
use crate::moe::MoeLayer;
use crate::params::{ParamId, ParamStore};
use crate::rng::Rng;
use crate::tensor::Tensor;
use crate::transformer::{Encoder, EncoderInput};

pub const PRIMITIVE_TARGETS: [&str; 28] = [
    "add", "sub", "mul", "div", "neg", "scale", "square", "silu", "tanh", "exp", "matmul", "reshape", "permute",
    "transpose", "slice", "concat", "gather_rows", "gather_elems", "scatter_add_rows", "sum", "mean", "sum_axes",
    "mean_axes", "softmax", "layer_norm", "reflectional_switch", "cross_entropy", "mse",
];

pub const SUITE_TARGETS: [&str; 34] = [
    "add", "sub", "mul", "div", "neg", "scale", "square", "silu", "tanh", "exp", "matmul", "reshape", "permute",
    "transpose", "slice", "concat", "gather_rows", "gather_elems", "scatter_add_rows", "sum", "mean", "sum_axes",
    "mean_axes", "softmax", "layer_norm", "reflectional_switch", "cross_entropy", "mse", "mlp_expert",
    "fasterkan", "moe_soft_paper", "moe_soft_standard", "moe_topk", "encoder",
];

#[derive(Clone, Debug)]
pub struct SuiteEntry {
    pub target: String,
    pub report: GradcheckReport,
}

struct Point {
    store: ParamStore<f64>,
    rng: Rng,
}

impl Point {
    fn new(seed: u64) -> Self {
        Point {
            store: ParamStore::new(),
            rng: Rng::new(seed),
        }
    }

    fn uniform(&mut self, name: &str, shape: &[usize], lo: f64, hi: f64) -> ParamId {
        let rng = &mut self.rng;
        self.store.add(name, Tensor::from_fn(shape, |_| rng.uniform(lo, hi)))
    }

    fn x(&mut self, name: &str, shape: &[usize]) -> ParamId {
        self.uniform(name, shape, -1.0, 1.0)
    }
}

/// `Σ out ⊙ probe` with the probe a function of the output shape only.
fn probe(g: &mut Graph<'_, f64>, out: Var) -> Result<Var> {
    let shape = g.shape(out).to_vec();
    let mut rng = Rng::new(0x5eed);
    let p = g.constant(Tensor::from_fn(shape, |_| rng.uniform(-1.0, 1.0)));
    let prod = g.mul(out, p)?;
    Ok(g.sum(prod))
}

fn check<F>(pt: &Point, opts: &GradcheckOptions, f: F) -> Result<GradcheckReport>
where
    F: Fn(&mut Graph<'_, f64>) -> Result<Var>,
{
    gradcheck_params(&pt.store, |g| f(g).and_then(|v| probe(g, v)), opts)
}

fn unary(seed: u64, opts: &GradcheckOptions, op: fn(&mut Graph<'_, f64>, Var) -> Result<Var>) -> Result<GradcheckReport> {
    let mut pt = Point::new(seed);
    let a = pt.x("a", &[3, 4]);
    check(&pt, opts, |g| {
        let a = g.param(a);
        op(g, a)
    })
}

fn binary(seed: u64, opts: &GradcheckOptions, op: fn(&mut Graph<'_, f64>, Var, Var) -> Result<Var>) -> Result<GradcheckReport> {
    let mut pt = Point::new(seed);
    let a = pt.x("a", &[2, 3, 4]);
    // broadcast along the leading axes
    let b = pt.uniform("b", &[3, 1], 0.5, 1.5);
    check(&pt, opts, |g| {
        let (a, b) = (g.param(a), g.param(b));
        op(g, a, b)
    })
}

fn tiny_model(dim: usize, router: RouterKind, mode: NormMode) -> ModelConfig {
    let mut c = ModelConfig::default();
    c.dim = dim;
    c.mlp_hidden = Some(dim.max(4));
    c.kan.grid_size = 4;
    c.moe.num_experts = 4;
    c.moe.slots = 2;
    c.moe.router = router;
    c.moe.norm_mode = mode;
    c.dropout = 0.0;
    c.p_max = 0.0;
    c
}

fn moe(seed: u64, opts: &GradcheckOptions, router: RouterKind, mode: NormMode) -> Result<GradcheckReport> {
    let mut pt = Point::new(seed);
    let c = tiny_model(4, router, mode);
    let layer = MoeLayer::new("moe", &c, &mut pt.store, &mut pt.rng)?;
    let x = pt.x("x", &[2, 3, 4]);
    check(&pt, opts, |g| {
        let x = g.param(x);
        Ok(layer.forward(g, x)?.output)
    })
}

/// Check one named target at the point drawn from `seed`.
pub fn run_target(name: &str, seed: u64, opts: &GradcheckOptions) -> Result<GradcheckReport> {
    match name {
        "add" => binary(seed, opts, |g, a, b| g.add(a, b)),
        "sub" => binary(seed, opts, |g, a, b| g.sub(a, b)),
        "mul" => binary(seed, opts, |g, a, b| g.mul(a, b)),
        "div" => binary(seed, opts, |g, a, b| g.div(a, b)),
        "neg" => unary(seed, opts, |g, a| Ok(g.neg(a))),
        "scale" => unary(seed, opts, |g, a| Ok(g.scale(a, -1.7))),
        "square" => unary(seed, opts, |g, a| Ok(g.square(a))),
        "silu" => unary(seed, opts, |g, a| Ok(g.silu(a))),
        "tanh" => unary(seed, opts, |g, a| Ok(g.tanh(a))),
        "exp" => unary(seed, opts, |g, a| Ok(g.exp(a))),
        "reshape" => unary(seed, opts, |g, a| g.reshape(a, &[2, 6])),
        "transpose" => unary(seed, opts, |g, a| g.transpose_last(a)),
        "slice" => unary(seed, opts, |g, a| g.slice(a, 1, 1, 2)),
        "gather_rows" => unary(seed, opts, |g, a| g.gather_rows(a, &[2, 0, 2])),
        "gather_elems" => unary(seed, opts, |g, a| g.gather_elems(a, &[11, 3, 3, 0], &[2, 2])),
        "sum" => unary(seed, opts, |g, a| Ok(g.sum(a))),
        "mean" => unary(seed, opts, |g, a| Ok(g.mean(a))),
        "mse" => binary(seed, opts, |g, a, b| {
            let bb = g.slice(a, 0, 1, 1)?;
            let t = g.mul(bb, b)?;
            let a0 = g.slice(a, 0, 0, 1)?;
            g.mse(a0, t)
        }),
        "matmul" => {
            let mut pt = Point::new(seed);
            let a = pt.x("a", &[2, 3, 4]);
            let b = pt.x("b", &[4, 5]);
            let c = pt.x("c", &[2, 5, 2]);
            check(&pt, opts, |g| {
                let (a, b, c) = (g.param(a), g.param(b), g.param(c));
                let ab = g.matmul(a, b)?;
                g.matmul(ab, c)
            })
        }
        "permute" => {
            let mut pt = Point::new(seed);
            let a = pt.x("a", &[2, 3, 4]);
            check(&pt, opts, |g| {
                let a = g.param(a);
                g.permute(a, &[2, 0, 1])
            })
        }
        "concat" => {
            let mut pt = Point::new(seed);
            let a = pt.x("a", &[2, 3]);
            let b = pt.x("b", &[2, 1]);
            check(&pt, opts, |g| {
                let (a, b) = (g.param(a), g.param(b));
                g.concat(&[a, b, a], 1)
            })
        }
        "scatter_add_rows" => {
            let mut pt = Point::new(seed);
            let a = pt.x("a", &[3, 2]);
            let b = pt.x("b", &[2, 2]);
            check(&pt, opts, |g| {
                let (a, b) = (g.param(a), g.param(b));
                g.scatter_add_rows(4, 2, &[(a, vec![0, 3, 0]), (b, vec![3, 1])])
            })
        }
        "sum_axes" | "mean_axes" => {
            let mean = name == "mean_axes";
            let mut pt = Point::new(seed);
            let a = pt.x("a", &[2, 3, 4]);
            check(&pt, opts, |g| {
                let a = g.param(a);
                if mean {
                    g.mean_axes(a, &[0, 2], true)
                } else {
                    g.sum_axes(a, &[1], false)
                }
            })
        }
        "softmax" => {
            let mut pt = Point::new(seed);
            let a = pt.uniform("a", &[2, 3, 4], -2.0, 2.0);
            check(&pt, opts, |g| {
                let a = g.param(a);
                let s1 = g.softmax(a, &[1, 2])?;
                let s2 = g.softmax(a, &[0])?;
                g.add(s1, s2)
            })
        }
        "layer_norm" => {
            let mut pt = Point::new(seed);
            let a = pt.x("a", &[3, 5]);
            let gain = pt.uniform("gain", &[5], 0.5, 1.5);
            let bias = pt.x("bias", &[5]);
            check(&pt, opts, |g| {
                let (a, gn, b) = (g.param(a), g.param(gain), g.param(bias));
                g.layer_norm(a, gn, b, 1e-5)
            })
        }
        "reflectional_switch" => {
            let mut pt = Point::new(seed);
            let a = pt.uniform("a", &[2, 3], -2.0, 2.0);
            let den = pt.uniform("den", &[1], 0.5, 1.0);
            check(&pt, opts, |g| {
                let (a, d) = (g.param(a), g.param(den));
                g.reflectional_switch(a, &[-1.5, -0.5, 0.5, 1.5], d)
            })
        }
        "cross_entropy" => {
            let mut pt = Point::new(seed);
            let a = pt.uniform("a", &[4, 5], -2.0, 2.0);
            check(&pt, opts, |g| {
                let a = g.param(a);
                g.cross_entropy(a, &[0, 4, 2, 2])
            })
        }
        "mlp_expert" => {
            let mut pt = Point::new(seed);
            let e = MlpExpert::new("e", 4, 6, 3, &mut pt.store, &mut pt.rng);
            for id in [e.b1, e.b2] {
                let rng = &mut pt.rng;
                pt.store.get_mut(id).data_mut().iter_mut().for_each(|v| *v = rng.uniform(-0.5, 0.5));
            }
            let x = pt.x("x", &[5, 4]);
            check(&pt, opts, |g| {
                let x = g.param(x);
                e.forward(g, x)
            })
        }
        "fasterkan" => {
            let mut pt = Point::new(seed);
            let kan = KanConfig {
                grid_size: 5,
                trainable_denominator: true,
                ..KanConfig::default()
            };
            let e = FasterKanLayer::new("k", 3, 2, &kan, 1e-5, &mut pt.store, &mut pt.rng)?;
            for id in [e.ln_gain, e.ln_bias] {
                let rng = &mut pt.rng;
                pt.store.get_mut(id).data_mut().iter_mut().for_each(|v| *v += rng.uniform(-0.3, 0.3));
            }
            let x = pt.x("x", &[4, 3]);
            check(&pt, opts, |g| {
                let x = g.param(x);
                e.forward(g, x)
            })
        }
        "moe_soft_paper" => moe(seed, opts, RouterKind::Soft, NormMode::Paper),
        "moe_soft_standard" => moe(seed, opts, RouterKind::Soft, NormMode::Standard),
        "moe_topk" => moe(seed, opts, RouterKind::Topk, NormMode::Paper),
        "encoder" => {
            let mut pt = Point::new(seed);
            let mut c = tiny_model(16, RouterKind::Topk, NormMode::Paper);
            c.layers = 2;
            c.heads = 4;
            c.input = InputKind::Scalars { arity: 3 };
            let enc = Encoder::new(&c, &mut pt.store, &mut pt.rng)?;
            let rng = &mut pt.rng;
            let x = Tensor::from_fn([4, 3], |_| rng.uniform(-1.0, 1.0));
            let t = Tensor::from_fn([4], |_| rng.uniform(-1.0, 1.0));
            gradcheck_params(
                &pt.store,
                |g| {
                    let y = enc.forward(g, EncoderInput::Scalars(&x), Mode::Eval, &mut Rng::new(0))?;
                    let t = g.constant(t.clone());
                    g.mse(y, t)
                },
                opts,
            )
        }
        other => Err(Error::contract("gradcheck", alloc::format!("unknown target `{other}`"))),
    }
}

/// Every target in [`SUITE_TARGETS`] order, each checked at `tol`.
pub fn run_suite(seed: u64, tol: f64) -> Result<Vec<SuiteEntry>> {
    let opts = GradcheckOptions {
        tol,
        seed,
        ..GradcheckOptions::default()
    };
    SUITE_TARGETS
        .iter()
        .map(|&t| {
            Ok(SuiteEntry {
                target: t.into(),
                report: run_target(t, seed, &opts)?,
            })
        })
        .collect()
}
