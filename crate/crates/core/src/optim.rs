//! Decoupled-weight-decay Adam.

use alloc::format;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::Gradients;
use crate::params::ParamStore;
use crate::scalar::Scalar;
#[cfg(not(feature = "std"))]
use num_traits::Float;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct AdamWConfig {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    pub weight_decay: f64,
}

impl Default for AdamWConfig {
    fn default() -> Self {
        AdamWConfig {
            lr: 5e-5,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
            weight_decay: 0.01,
        }
    }
}

/// Per-parameter first and second moments, allocated lazily on the first
/// step.
#[derive(Clone, Debug)]
pub struct AdamW<T> {
    pub cfg: AdamWConfig,
    step: u64,
    m: Vec<Vec<T>>,
    v: Vec<Vec<T>>,
}

impl<T: Scalar> AdamW<T> {
    pub fn new(cfg: AdamWConfig) -> Self {
        AdamW {
            cfg,
            step: 0,
            m: Vec::new(),
            v: Vec::new(),
        }
    }

    pub fn steps_taken(&self) -> u64 {
        self.step
    }

    /// One update of every trainable parameter. A parameter absent from
    /// `grads` is treated as having zero gradient (decay still applies).
    ///
    /// All gradients are checked before anything is modified, so a failed
    /// step leaves parameters and moments untouched.
    pub fn step(&mut self, store: &mut ParamStore<T>, grads: &Gradients<T>) -> Result<()> {
        for id in store.ids() {
            if let Some(g) = grads.param(id) {
                if g.iter().any(|v| !v.is_finite()) {
                    return Err(Error::NonFinite(format!("gradient of {}", store.entry(id).name)));
                }
            }
        }
        if self.m.len() != store.len() {
            self.m = store.entries().iter().map(|e| alloc::vec![T::zero(); e.tensor.len()]).collect();
            self.v = self.m.clone();
        }
        self.step += 1;
        let c = self.cfg;
        let t = self.step as f64;
        let bc1 = 1.0 - c.beta1.powf(t);
        let bc2 = 1.0 - c.beta2.powf(t);
        let (b1, b2) = (T::of_f64(c.beta1), T::of_f64(c.beta2));
        let (one_b1, one_b2) = (T::of_f64(1.0 - c.beta1), T::of_f64(1.0 - c.beta2));
        let decay = T::of_f64(1.0 - c.lr * c.weight_decay);
        let step_size = T::of_f64(c.lr / bc1);
        let bc2_sqrt = T::of_f64(bc2.sqrt());
        let eps = T::of_f64(c.eps);

        let ids: Vec<_> = store.ids().collect();
        for id in ids {
            if !store.entry(id).trainable {
                continue;
            }
            let g = grads.param(id);
            let (m, v) = (&mut self.m[id.0], &mut self.v[id.0]);
            let p = store.get_mut(id).data_mut();
            for i in 0..p.len() {
                let gi = g.map_or(T::zero(), |g| g[i]);
                m[i] = b1 * m[i] + one_b1 * gi;
                v[i] = b2 * v[i] + one_b2 * gi * gi;
                p[i] = p[i] * decay - step_size * m[i] / (v[i].sqrt() / bc2_sqrt + eps);
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::Graph;
    use crate::tensor::Tensor;

    fn one_param(v: f64) -> (ParamStore<f64>, crate::params::ParamId) {
        let mut s = ParamStore::new();
        let id = s.add("p", Tensor::new([1], alloc::vec![v]).unwrap());
        (s, id)
    }

    /// Gradients of `scale · p` for the single parameter.
    fn grads_of(store: &ParamStore<f64>, id: crate::params::ParamId, scale: f64) -> Gradients<f64> {
        let mut g = Graph::with_params(store);
        let p = g.param(id);
        let y = g.scale(p, scale);
        let y = g.sum(y);
        g.backward(y).unwrap()
    }

    #[test]
    fn zero_gradient_without_decay_is_a_fixed_point() {
        let (mut s, id) = one_param(0.7);
        let mut opt = AdamW::new(AdamWConfig {
            lr: 0.1,
            weight_decay: 0.0,
            ..AdamWConfig::default()
        });
        let g = grads_of(&s, id, 0.0);
        for _ in 0..3 {
            opt.step(&mut s, &g).unwrap();
        }
        assert_eq!(s.get(id).data(), &[0.7]);
    }

    #[test]
    fn first_step_moves_by_lr() {
        let (mut s, id) = one_param(0.0);
        let mut opt = AdamW::new(AdamWConfig {
            lr: 1e-3,
            eps: 0.0,
            weight_decay: 0.0,
            ..AdamWConfig::default()
        });
        let g = grads_of(&s, id, 1.0);
        opt.step(&mut s, &g).unwrap();
        assert!((s.get(id).data()[0] + 1e-3).abs() < 1e-12);
    }

    #[test]
    fn decoupled_decay() {
        let (mut s, id) = one_param(2.0);
        let mut opt = AdamW::new(AdamWConfig {
            lr: 0.01,
            weight_decay: 0.1,
            ..AdamWConfig::default()
        });
        let g = grads_of(&s, id, 0.0);
        opt.step(&mut s, &g).unwrap();
        assert!((s.get(id).data()[0] - 2.0 * (1.0 - 0.01 * 0.1)).abs() < 1e-15);
    }

    #[test]
    fn non_finite_gradient_names_the_parameter() {
        let (mut s, id) = one_param(1.0);
        let mut opt = AdamW::new(AdamWConfig::default());
        let g = grads_of(&s, id, f64::NAN);
        let err = opt.step(&mut s, &g).unwrap_err();
        assert!(matches!(&err, Error::NonFinite(m) if m.contains('p')), "{err}");
        assert_eq!(s.get(id).data(), &[1.0]);
        assert_eq!(opt.steps_taken(), 0);
    }
}
