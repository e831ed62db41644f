use serde::{Deserialize, Serialize};

use crate::models::MlpModel;

use super::backprop::Gradients;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct AdamConfig {
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl Default for AdamConfig {
    fn default() -> Self {
        Self {
            learning_rate: 1e-3,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
        }
    }
}

/// Adam over an ordered list of flat parameter tensors.
#[derive(Clone, Debug)]
pub struct Adam {
    cfg: AdamConfig,
    step: u64,
    m: Vec<Vec<f64>>,
    v: Vec<Vec<f64>>,
}

impl Adam {
    /// `sizes` gives the length of each parameter tensor, in the order later
    /// passed to [`Adam::step`].
    pub fn new(cfg: AdamConfig, sizes: &[usize]) -> Self {
        Self {
            cfg,
            step: 0,
            m: sizes.iter().map(|&n| vec![0.0; n]).collect(),
            v: sizes.iter().map(|&n| vec![0.0; n]).collect(),
        }
    }

    pub fn for_model(cfg: AdamConfig, model: &MlpModel) -> Self {
        let sizes: Vec<usize> = model
            .layers()
            .iter()
            .flat_map(|l| [l.weight.data().len(), l.bias.len()])
            .collect();
        Self::new(cfg, &sizes)
    }

    pub fn step_count(&self) -> u64 {
        self.step
    }

    pub fn step(&mut self, params: &mut [&mut [f64]], grads: &[&[f64]]) {
        assert_eq!(params.len(), self.m.len(), "Adam: parameter tensor count changed");
        assert_eq!(grads.len(), self.m.len(), "Adam: gradient tensor count mismatch");
        self.step += 1;
        let AdamConfig {
            learning_rate,
            beta1,
            beta2,
            eps,
        } = self.cfg;
        let bc1 = 1.0 - beta1.powi(self.step as i32);
        let bc2 = 1.0 - beta2.powi(self.step as i32);
        for (k, (p, g)) in params.iter_mut().zip(grads).enumerate() {
            let (m, v) = (&mut self.m[k], &mut self.v[k]);
            for i in 0..p.len() {
                m[i] = beta1 * m[i] + (1.0 - beta1) * g[i];
                v[i] = beta2 * v[i] + (1.0 - beta2) * g[i] * g[i];
                let m_hat = m[i] / bc1;
                let v_hat = v[i] / bc2;
                p[i] -= learning_rate * m_hat / (v_hat.sqrt() + eps);
            }
        }
    }

    /// Updates every weight and bias of `model`; biases of layers with
    /// `frozen_bias[l] == true` are left untouched.
    pub fn step_model(&mut self, model: &mut MlpModel, grads: &Gradients, frozen_bias: &[bool]) {
        let zero_biases: Vec<Vec<f64>> = grads
            .biases
            .iter()
            .enumerate()
            .map(|(l, b)| {
                if frozen_bias.get(l).copied().unwrap_or(false) {
                    vec![0.0; b.len()]
                } else {
                    b.clone()
                }
            })
            .collect();
        let grad_refs: Vec<&[f64]> = grads
            .weights
            .iter()
            .zip(&zero_biases)
            .flat_map(|(w, b)| [w.data(), b.as_slice()])
            .collect();
        let mut params: Vec<&mut [f64]> = Vec::with_capacity(grad_refs.len());
        for layer in model.layers_mut() {
            params.push(layer.weight.data_mut());
            params.push(layer.bias.as_mut_slice());
        }
        self.step(&mut params, &grad_refs);
    }
}
