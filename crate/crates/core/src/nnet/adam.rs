//! ADAM with bias-corrected moments.

use serde::{Deserialize, Serialize};

use super::Parameterized;
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AdamConfig {
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
}

impl Default for AdamConfig {
    fn default() -> Self {
        Self {
            learning_rate: 1e-3,
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
        }
    }
}

/// Optimizer state; moment buffers mirror the parameter tensors one-to-one.
#[derive(Debug, Clone, PartialEq)]
pub struct AdamState {
    pub config: AdamConfig,
    pub step: u64,
    first: Vec<Vec<f64>>,
    second: Vec<Vec<f64>>,
}

impl AdamState {
    pub fn new(config: AdamConfig, params: &impl Parameterized) -> Self {
        let zeros: Vec<Vec<f64>> = params
            .tensors()
            .iter()
            .map(|t| vec![0.0; t.data.len()])
            .collect();
        Self {
            config,
            step: 0,
            first: zeros.clone(),
            second: zeros,
        }
    }
}

/// One ADAM step on `params` in place.
pub fn adam_update<P: Parameterized>(state: &mut AdamState, params: &mut P, grads: &P) -> Result<()> {
    let grads = grads.tensors();
    let targets = params.tensors_mut();
    if targets.len() != state.first.len() || grads.len() != state.first.len() {
        return Err(Error::Shape(format!(
            "adam: {} parameter tensors, {} gradient tensors, {} moment buffers",
            targets.len(),
            grads.len(),
            state.first.len()
        )));
    }
    for ((p, g), m) in targets.iter().zip(&grads).zip(&state.first) {
        if p.len() != g.data.len() || p.len() != m.len() {
            return Err(Error::Shape(format!(
                "adam: tensor {} has {} params, {} grads, {} moments",
                g.name,
                p.len(),
                g.data.len(),
                m.len()
            )));
        }
    }
    let AdamConfig {
        learning_rate,
        beta1,
        beta2,
        epsilon,
    } = state.config;
    state.step += 1;
    let bc1 = 1.0 - beta1.powi(state.step as i32);
    let bc2 = 1.0 - beta2.powi(state.step as i32);
    for (((p, g), m), v) in targets
        .into_iter()
        .zip(&grads)
        .zip(&mut state.first)
        .zip(&mut state.second)
    {
        for i in 0..p.len() {
            let gi = g.data[i];
            m[i] = beta1 * m[i] + (1.0 - beta1) * gi;
            v[i] = beta2 * v[i] + (1.0 - beta2) * gi * gi;
            let m_hat = m[i] / bc1;
            let v_hat = v[i] / bc2;
            p[i] -= learning_rate * m_hat / (v_hat.sqrt() + epsilon);
        }
    }
    Ok(())
}
