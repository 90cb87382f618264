//! Central finite differences against the tape, in `f64`.
//!
//! For each checked coordinate the numerical derivative
//! `(f(x + h·e) − f(x − h·e)) / 2h` is compared with the reverse-mode
//! gradient using `|a − b| / max(|a|, |b|, 1e-8)`.

mod suite;

pub use suite::{run_suite, run_target, SuiteEntry, PRIMITIVE_TARGETS, SUITE_TARGETS};

use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;

use crate::error::Result;
use crate::graph::{Graph, Var};
use crate::params::{ParamId, ParamStore};
use crate::rng::Rng;
use crate::tensor::Tensor;

#[derive(Clone, Debug)]
pub struct GradcheckOptions {
    pub h: f64,
    pub tol: f64,
    /// Check at most this many randomly chosen coordinates per parameter;
    /// `None` checks all of them.
    pub max_coords_per_param: Option<usize>,
    pub seed: u64,
}

impl Default for GradcheckOptions {
    fn default() -> Self {
        GradcheckOptions {
            h: 1e-5,
            tol: 1e-4,
            max_coords_per_param: None,
            seed: 0,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct GradcheckReport {
    pub max_rel_err: f64,
    /// Parameter name and flat index of the worst coordinate.
    pub worst: Option<(String, usize)>,
    pub checked: usize,
    pub pass: bool,
    /// Set when an evaluation produced a non-finite value.
    pub failure: Option<String>,
}

pub fn relative_error(a: f64, b: f64) -> f64 {
    (a - b).abs() / a.abs().max(b.abs()).max(1e-8)
}

/// Check every trainable parameter in `store` for the scalar built by `f`.
pub fn gradcheck_params<F>(store: &ParamStore<f64>, f: F, opts: &GradcheckOptions) -> Result<GradcheckReport>
where
    F: Fn(&mut Graph<'_, f64>) -> Result<Var>,
{
    let analytic = {
        let mut g = Graph::with_params(store);
        let out = f(&mut g)?;
        let v = g.value(out)[0];
        if !v.is_finite() {
            return Ok(failed(format!("non-finite value {v} at the base point")));
        }
        g.backward(out)?
    };

    let mut rng = Rng::new(opts.seed);
    let mut work = store.clone();
    let mut report = GradcheckReport {
        max_rel_err: 0.0,
        worst: None,
        checked: 0,
        pass: true,
        failure: None,
    };

    let eval = |s: &ParamStore<f64>| -> Result<f64> {
        let mut g = Graph::with_params(s);
        let out = f(&mut g)?;
        Ok(g.value(out)[0])
    };

    for id in store.ids() {
        let entry = store.entry(id);
        if !entry.trainable {
            continue;
        }
        let n = entry.tensor.len();
        let coords: Vec<usize> = match opts.max_coords_per_param {
            Some(m) if m < n => (0..m).map(|_| rng.below(n)).collect(),
            _ => (0..n).collect(),
        };
        let grad = analytic.param(id);
        for c in coords {
            let orig = work.get(id).data()[c];
            work.get_mut(id).data_mut()[c] = orig + opts.h;
            let fp = eval(&work)?;
            work.get_mut(id).data_mut()[c] = orig - opts.h;
            let fm = eval(&work)?;
            work.get_mut(id).data_mut()[c] = orig;
            if !fp.is_finite() || !fm.is_finite() {
                report.pass = false;
                report.failure = Some(format!("non-finite value perturbing {}[{c}]", entry.name));
                return Ok(report);
            }
            let numeric = (fp - fm) / (2.0 * opts.h);
            let a = grad.map_or(0.0, |g| g[c]);
            let err = relative_error(a, numeric);
            report.checked += 1;
            if err > report.max_rel_err || report.worst.is_none() {
                report.max_rel_err = err;
                report.worst = Some((entry.name.clone(), c));
            }
        }
    }
    report.pass = report.max_rel_err < opts.tol;
    Ok(report)
}

/// Single-tensor form: `f` receives the point as a grad-enabled node.
pub fn finite_diff_gradcheck<F>(point: &Tensor<f64>, f: F, h: f64, tol: f64) -> Result<GradcheckReport>
where
    F: Fn(&mut Graph<'_, f64>, Var) -> Result<Var>,
{
    let mut store = ParamStore::new();
    let id: ParamId = store.add("x", point.clone());
    let opts = GradcheckOptions {
        h,
        tol,
        ..GradcheckOptions::default()
    };
    gradcheck_params(
        &store,
        |g| {
            let x = g.param(id);
            f(g, x)
        },
        &opts,
    )
}

fn failed(msg: String) -> GradcheckReport {
    GradcheckReport {
        max_rel_err: f64::INFINITY,
        worst: None,
        checked: 0,
        pass: false,
        failure: Some(msg),
    }
}
