//! Central finite-difference check of [`Network::backward`].

use super::{LayerSpec, Network, ParamSet};
use crate::Result;
use alloc::vec::Vec;

#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct GradCheck {
    /// Largest `|analytic − numeric| / max(|analytic|, |numeric|, floor)`.
    pub max_rel_err: f64,
    pub checked: usize,
    /// Coordinates whose perturbation moved a ReLU input across zero.
    pub skipped: usize,
}

fn relu_signs(net: &Network, acts: &[Vec<f64>]) -> Vec<bool> {
    let mut out = Vec::new();
    for (i, layer) in net.layers().iter().enumerate() {
        if let LayerSpec::Relu { .. } = layer {
            out.extend(acts[i].iter().map(|&v| v > 0.0));
        }
    }
    out
}

/// Checks the gradient of `Σ weights[i] · output[i]` at `params` for every
/// parameter coordinate.
pub fn grad_check(
    net: &Network,
    params: &ParamSet,
    input: &[f64],
    weights: &[f64],
    h: f64,
    floor: f64,
) -> Result<GradCheck> {
    let cache = net.forward(params, input)?;
    let analytic = net.backward(params, &cache, weights)?;
    let base_signs = relu_signs(net, &cache.activations);
    let mut p = params.clone();
    let mut report = GradCheck::default();
    let eval = |p: &ParamSet| -> Result<(f64, Vec<bool>)> {
        let c = net.forward(p, input)?;
        let loss = c.output().iter().zip(weights).map(|(y, w)| y * w).sum();
        Ok((loss, relu_signs(net, &c.activations)))
    };
    for j in 0..params.len() {
        let orig = p.values[j];
        p.values[j] = orig + h;
        let (up, s_up) = eval(&p)?;
        p.values[j] = orig - h;
        let (down, s_down) = eval(&p)?;
        p.values[j] = orig;
        if s_up != base_signs || s_down != base_signs {
            report.skipped += 1;
            continue;
        }
        let numeric = (up - down) / (2.0 * h);
        let a = analytic[j];
        let denom = a.abs().max(numeric.abs()).max(floor);
        let err = (a - numeric).abs() / denom;
        if err > report.max_rel_err {
            report.max_rel_err = err;
        }
        report.checked += 1;
    }
    Ok(report)
}
