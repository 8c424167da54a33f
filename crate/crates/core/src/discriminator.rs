//! Classifier over (state, action) pairs; its output becomes the
//! generator's reward.

use crate::math;
use crate::nn::{update, LayerSpec, Network, OptimizerKind, OptimizerState, ParamSet};
use crate::policy::{ArchConfig, ObservationWindow, CHANNELS};
use crate::sim::{Action, ACTION_COUNT};
use crate::{Error, Result, SimRng};
use alloc::vec;
use alloc::vec::Vec;
use rand::Rng;

/// Scores are clamped to `[CLAMP, 1 - CLAMP]`.
pub const CLAMP: f64 = 1e-6;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Source {
    Expert,
    Generated,
}

#[derive(Clone, Debug, PartialEq)]
pub struct StateActionPair {
    pub window: ObservationWindow,
    pub action: Action,
}

/// Probability that a pair came from the expert.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct DiscOutput {
    pub d: f64,
}

impl DiscOutput {
    pub fn from_logit(logit: f64) -> Self {
        DiscOutput {
            d: math::sigmoid(logit).clamp(CLAMP, 1.0 - CLAMP),
        }
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "snake_case"))]
pub enum RewardForm {
    /// `-ln(1 - D)`
    #[default]
    NegLogOneMinusD,
    /// `ln D`
    LogD,
}

/// `-ln(1 - D)`: increasing in D, bounded by `-ln(CLAMP)`.
pub fn gail_reward(out: DiscOutput) -> f64 {
    -math::ln_1p(-out.d)
}

pub fn reward(out: DiscOutput, form: RewardForm) -> f64 {
    match form {
        RewardForm::NegLogOneMinusD => gail_reward(out),
        RewardForm::LogD => math::ln(out.d),
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(default))]
pub struct DiscConfig {
    pub lr: f64,
    /// Pairs per gradient step, split evenly between the two sources.
    pub minibatch: usize,
}

impl Default for DiscConfig {
    fn default() -> Self {
        DiscConfig {
            lr: 3e-4,
            minibatch: 64,
        }
    }
}

/// Normalized window plus action one-hot, two hidden layers, scalar logit.
#[derive(Clone, Debug, PartialEq)]
pub struct Discriminator {
    pub arch: ArchConfig,
    pub net: Network,
}

fn bce(d: f64, label: f64) -> f64 {
    -(label * math::ln(d) + (1.0 - label) * math::ln(1.0 - d))
}

impl Discriminator {
    pub fn new(arch: ArchConfig) -> Result<Self> {
        let flat = arch.window * CHANNELS;
        let inputs = flat + ACTION_COUNT;
        let net = Network::new(vec![
            LayerSpec::NormTime {
                window: arch.window,
                channels: CHANNELS,
                eps: arch.norm_eps,
                passthrough: ACTION_COUNT,
            },
            LayerSpec::Dense {
                inputs,
                outputs: arch.hidden,
            },
            LayerSpec::Relu { size: arch.hidden },
            LayerSpec::Dense {
                inputs: arch.hidden,
                outputs: arch.hidden,
            },
            LayerSpec::Relu { size: arch.hidden },
            LayerSpec::Dense {
                inputs: arch.hidden,
                outputs: 1,
            },
        ])?;
        Ok(Discriminator { arch, net })
    }

    pub fn init_params(&self, seed: u64) -> ParamSet {
        self.net.init_params(seed, self.arch.head_gain)
    }

    pub fn input(&self, pair: &StateActionPair) -> Result<Vec<f64>> {
        let flat = self.arch.window * CHANNELS;
        if pair.window.data.len() != flat {
            return Err(Error::ShapeMismatch {
                expected: flat,
                actual: pair.window.data.len(),
            });
        }
        let mut x = Vec::with_capacity(flat + ACTION_COUNT);
        x.extend_from_slice(&pair.window.data);
        x.extend_from_slice(&pair.action.one_hot());
        Ok(x)
    }

    pub fn logit(&self, params: &ParamSet, pair: &StateActionPair) -> Result<f64> {
        let z = self.net.predict(params, &self.input(pair)?)?[0];
        if !z.is_finite() {
            return Err(Error::NonFiniteValue("discriminator logit"));
        }
        Ok(z)
    }

    pub fn score(&self, params: &ParamSet, pair: &StateActionPair) -> Result<DiscOutput> {
        Ok(DiscOutput::from_logit(self.logit(params, pair)?))
    }

    /// Mean binary cross-entropy over both batches, expert labelled 1.
    pub fn loss(
        &self,
        params: &ParamSet,
        expert: &[StateActionPair],
        generated: &[StateActionPair],
    ) -> Result<f64> {
        let n = expert.len() + generated.len();
        if n == 0 {
            return Err(Error::EmptyBatch);
        }
        let mut total = 0.0;
        for (pairs, label) in [(expert, 1.0), (generated, 0.0)] {
            for pair in pairs {
                total += bce(self.score(params, pair)?.d, label);
            }
        }
        Ok(total / n as f64)
    }

    /// Loss and parameter gradient over labelled pairs.
    pub fn loss_and_grad(
        &self,
        params: &ParamSet,
        batch: &[(&StateActionPair, f64)],
    ) -> Result<(f64, Vec<f64>)> {
        if batch.is_empty() {
            return Err(Error::EmptyBatch);
        }
        let n = batch.len() as f64;
        let mut grads = vec![0.0; self.net.param_count()];
        let mut loss = 0.0;
        for &(pair, label) in batch {
            let cache = self.net.forward(params, &self.input(pair)?)?;
            let z = cache.output()[0];
            let d = DiscOutput::from_logit(z).d;
            loss += bce(d, label);
            let g = (math::sigmoid(z) - label) / n;
            self.net.backward_into(params, &cache, &[g], &mut grads)?;
        }
        Ok((loss / n, grads))
    }

    /// Minibatch training on equally sized expert and generated batches.
    /// Returns the loss over the full batches after the last step.
    pub fn train(
        &self,
        params: &mut ParamSet,
        opt: &mut OptimizerState,
        expert: &[StateActionPair],
        generated: &[StateActionPair],
        iters: usize,
        cfg: &DiscConfig,
        rng: &mut SimRng,
    ) -> Result<f64> {
        if expert.is_empty() || generated.is_empty() {
            return Err(Error::EmptyBatch);
        }
        if expert.len() != generated.len() {
            return Err(Error::UnbalancedBatch {
                expert: expert.len(),
                generated: generated.len(),
            });
        }
        let half = (cfg.minibatch / 2).clamp(1, expert.len());
        let mut batch = Vec::with_capacity(2 * half);
        for _ in 0..iters {
            batch.clear();
            for _ in 0..half {
                batch.push((&expert[rng.random_range(0..expert.len())], 1.0));
                batch.push((&generated[rng.random_range(0..generated.len())], 0.0));
            }
            let (_, grads) = self.loss_and_grad(params, &batch)?;
            update(params, &grads, opt, cfg.lr)?;
        }
        self.loss(params, expert, generated)
    }

    pub fn optimizer(&self) -> OptimizerState {
        OptimizerState::new(OptimizerKind::adam(), self.net.param_count())
    }
}
