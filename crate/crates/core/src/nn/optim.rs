use super::ParamSet;
use crate::math;
use crate::{Error, Result};
use alloc::vec;
use alloc::vec::Vec;

#[derive(Clone, Copy, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub enum OptimizerKind {
    /// `params -= lr * grad`
    Sgd,
    /// Adaptive moments with bias correction.
    Adam { beta1: f64, beta2: f64, eps: f64 },
}

impl OptimizerKind {
    pub fn adam() -> Self {
        OptimizerKind::Adam {
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct OptimizerState {
    pub kind: OptimizerKind,
    pub m: Vec<f64>,
    pub v: Vec<f64>,
    pub steps: u64,
}

impl OptimizerState {
    pub fn new(kind: OptimizerKind, len: usize) -> Self {
        let moments = match kind {
            OptimizerKind::Sgd => 0,
            OptimizerKind::Adam { .. } => len,
        };
        OptimizerState {
            kind,
            m: vec![0.0; moments],
            v: vec![0.0; moments],
            steps: 0,
        }
    }
}

/// One descent step. Non-finite gradients are rejected before anything is
/// modified.
pub fn update(
    params: &mut ParamSet,
    grads: &[f64],
    state: &mut OptimizerState,
    lr: f64,
) -> Result<()> {
    if grads.len() != params.values.len() {
        return Err(Error::ShapeMismatch {
            expected: params.values.len(),
            actual: grads.len(),
        });
    }
    if !grads.iter().all(|g| g.is_finite()) {
        return Err(Error::NonFiniteValue("gradient"));
    }
    match state.kind {
        OptimizerKind::Sgd => {
            for (p, g) in params.values.iter_mut().zip(grads) {
                *p -= lr * g;
            }
        }
        OptimizerKind::Adam { beta1, beta2, eps } => {
            if state.m.len() != grads.len() {
                return Err(Error::ShapeMismatch {
                    expected: grads.len(),
                    actual: state.m.len(),
                });
            }
            state.steps += 1;
            let t = state.steps as f64;
            let c1 = 1.0 - libm::pow(beta1, t);
            let c2 = 1.0 - libm::pow(beta2, t);
            for i in 0..grads.len() {
                let g = grads[i];
                state.m[i] = beta1 * state.m[i] + (1.0 - beta1) * g;
                state.v[i] = beta2 * state.v[i] + (1.0 - beta2) * g * g;
                let m_hat = state.m[i] / c1;
                let v_hat = state.v[i] / c2;
                params.values[i] -= lr * m_hat / (math::sqrt(v_hat) + eps);
            }
        }
    }
    Ok(())
}

/// Rescales `grads` in place so its L2 norm is at most `max_norm`; returns
/// the norm before clipping.
pub fn clip_grad_norm(grads: &mut [f64], max_norm: f64) -> f64 {
    let norm = math::sqrt(grads.iter().map(|g| g * g).sum());
    if norm > max_norm && norm > 0.0 {
        let s = max_norm / norm;
        for g in grads.iter_mut() {
            *g *= s;
        }
    }
    norm
}
