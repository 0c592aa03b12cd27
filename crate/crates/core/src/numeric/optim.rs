use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::{ParamStore, Scalar, Tensor};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct AdamConfig {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
    /// Global gradient-norm threshold; `None` disables clipping.
    pub clip: Option<f64>,
}

impl Default for AdamConfig {
    fn default() -> Self {
        Self {
            lr: 1e-3,
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
            clip: Some(5.0),
        }
    }
}

/// Adam moments and step counter for one [`ParamStore`].
#[derive(Clone, Debug)]
pub struct Adam<T> {
    pub config: AdamConfig,
    step: u64,
    moments: BTreeMap<String, (Tensor<T>, Tensor<T>)>,
}

impl<T: Scalar> Adam<T> {
    pub fn new(config: AdamConfig) -> Self {
        Self {
            config,
            step: 0,
            moments: BTreeMap::new(),
        }
    }

    pub fn step_count(&self) -> u64 {
        self.step
    }

    pub fn moments(&self, name: &str) -> Option<&(Tensor<T>, Tensor<T>)> {
        self.moments.get(name)
    }

    /// One bias-corrected Adam update from the store's gradients, after
    /// global-norm clipping. Gradients are zeroed afterwards.
    pub fn step(&mut self, store: &mut ParamStore<T>) {
        self.step += 1;
        let cfg = self.config;
        let norm = store.grad_norm();
        let clip_scale = match cfg.clip {
            Some(max) if norm > T::lit(max) => T::lit(max) / norm,
            _ => T::one(),
        };

        let (b1, b2) = (T::lit(cfg.beta1), T::lit(cfg.beta2));
        let t = self.step as i32;
        let c1 = T::one() - b1.powi(t);
        let c2 = T::one() - b2.powi(t);
        let (lr, eps) = (T::lit(cfg.lr), T::lit(cfg.epsilon));

        for (name, p) in store.iter_mut() {
            let (m, v) = self
                .moments
                .entry(name.to_string())
                .or_insert_with(|| (Tensor::zeros(p.value.shape()), Tensor::zeros(p.value.shape())));
            let values = p.value.data_mut();
            let grads = p.grad.data_mut();
            for (((w, g), m), v) in values
                .iter_mut()
                .zip(grads.iter_mut())
                .zip(m.data_mut())
                .zip(v.data_mut())
            {
                let g_eff = *g * clip_scale;
                *m = b1 * *m + (T::one() - b1) * g_eff;
                *v = b2 * *v + (T::one() - b2) * g_eff * g_eff;
                let m_hat = *m / c1;
                let v_hat = *v / c2;
                *w -= lr * m_hat / (v_hat.sqrt() + eps);
                *g = T::zero();
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::Tensor64;

    fn one_param(value: f64, grad: f64) -> ParamStore<f64> {
        let mut s = ParamStore::new(0);
        s.insert("w", Tensor64::scalar(value)).unwrap();
        s.get_mut("w").unwrap().grad = Tensor64::scalar(grad);
        s
    }

    #[test]
    fn zero_gradient_leaves_parameters() {
        let mut s = one_param(0.7, 0.0);
        let mut opt = Adam::new(AdamConfig::default());
        opt.step(&mut s);
        assert_eq!(s.value("w").unwrap().item(), 0.7);
        assert_eq!(opt.step_count(), 1);
    }

    #[test]
    fn first_step_moves_by_learning_rate() {
        let mut s = one_param(1.0, 1.0);
        let mut opt = Adam::new(AdamConfig {
            lr: 0.1,
            ..AdamConfig::default()
        });
        opt.step(&mut s);
        let w = s.value("w").unwrap().item();
        assert!((w - 0.9).abs() < 1e-6, "{w}");
        assert_eq!(s.get("w").unwrap().grad.item(), 0.0);
    }

    #[test]
    fn clipping_halves_a_norm_ten_gradient() {
        let mut s = ParamStore::<f64>::new(0);
        s.insert("w", Tensor64::vector(&[0.0, 0.0])).unwrap();
        s.get_mut("w").unwrap().grad = Tensor64::vector(&[6.0, 8.0]);
        let mut opt = Adam::new(AdamConfig::default());
        opt.step(&mut s);
        let (m, v) = opt.moments("w").unwrap();
        // m = (1 - beta1) * g_eff with g_eff = g / 2
        assert!((m.data()[0] - 0.1 * 3.0).abs() < 1e-12);
        assert!((m.data()[1] - 0.1 * 4.0).abs() < 1e-12);
        assert!((v.data()[1] - 0.001 * 16.0).abs() < 1e-12);
    }
}
