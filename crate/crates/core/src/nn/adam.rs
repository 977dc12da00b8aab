use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use super::param::{Grads, ParamStore};
use super::tensor::Tensor;

#[derive(Copy, Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AdamConfig {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl Default for AdamConfig {
    fn default() -> Self {
        Self { lr: 1e-3, beta1: 0.9, beta2: 0.999, eps: 1e-8 }
    }
}

/// Bias-corrected Adam with per-parameter moment tensors.
#[derive(Clone, Debug)]
pub struct Adam {
    pub config: AdamConfig,
    step: u64,
    m: Vec<Tensor>,
    v: Vec<Tensor>,
}

impl Adam {
    pub fn new(store: &ParamStore, config: AdamConfig) -> Self {
        let zeros = || store.params().iter().map(|p| Tensor::zeros(p.value.shape())).collect();
        Self { config, step: 0, m: zeros(), v: zeros() }
    }

    pub fn steps(&self) -> u64 {
        self.step
    }

    /// Applies one update from `grads`, then zeroes them.
    pub fn step(&mut self, store: &mut ParamStore, grads: &mut Grads) {
        self.step += 1;
        let AdamConfig { lr, beta1, beta2, eps } = self.config;
        let t = self.step as i32;
        let bc1 = 1.0 - libm::pow(beta1, t as f64);
        let bc2 = 1.0 - libm::pow(beta2, t as f64);
        for (i, param) in store.params_mut().iter_mut().enumerate() {
            let g = grads.tensors()[i].data();
            let m = self.m[i].data_mut();
            let v = self.v[i].data_mut();
            for (k, w) in param.value.data_mut().iter_mut().enumerate() {
                m[k] = beta1 * m[k] + (1.0 - beta1) * g[k];
                v[k] = beta2 * v[k] + (1.0 - beta2) * g[k] * g[k];
                let mhat = m[k] / bc1;
                let vhat = v[k] / bc2;
                *w -= lr * mhat / (libm::sqrt(vhat) + eps);
            }
        }
        grads.zero();
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nn::ParamId;

    #[test]
    fn zero_grads_leave_params_unchanged() {
        let mut store = ParamStore::new();
        let mut rng = crate::rng::seeded(3);
        store.uniform("w", &[4, 3], &mut rng);
        let before = store.clone();
        let mut grads = store.zero_grads();
        let mut adam = Adam::new(&store, AdamConfig::default());
        for _ in 0..5 {
            adam.step(&mut store, &mut grads);
        }
        assert_eq!(store, before);
    }

    #[test]
    fn first_step_matches_closed_form() {
        // with m0 = v0 = 0 the bias-corrected first step is -lr·g/(|g| + eps)
        for g in [0.3, -2.0, 1e-3] {
            let mut store = ParamStore::new();
            let id = store.constant("w", &[1], 1.5);
            let mut grads = store.zero_grads();
            grads.get_mut(id).data_mut()[0] = g;
            let cfg = AdamConfig::default();
            let mut adam = Adam::new(&store, cfg);
            adam.step(&mut store, &mut grads);
            let expect = 1.5 - cfg.lr * g / (libm::fabs(g) + cfg.eps);
            assert!((store.get(id).data()[0] - expect).abs() < 1e-15);
            assert_eq!(grads.get(ParamId(0)).data()[0], 0.0);
        }
    }

    #[test]
    fn updates_are_bitwise_deterministic() {
        let run = || {
            let mut store = ParamStore::new();
            let mut rng = crate::rng::seeded(5);
            let id = store.uniform("w", &[8], &mut rng);
            let mut adam = Adam::new(&store, AdamConfig::default());
            for s in 0..10 {
                let mut grads = store.zero_grads();
                for (k, g) in grads.get_mut(id).data_mut().iter_mut().enumerate() {
                    *g = libm::sin((s * 8 + k) as f64);
                }
                adam.step(&mut store, &mut grads);
            }
            store
        };
        assert_eq!(run(), run());
    }
}
