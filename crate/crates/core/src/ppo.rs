//! Clipped-surrogate policy optimization with a separate value network and
//! generalized advantage estimation.

use crate::math;
use crate::nn::{clip_grad_norm, update, Network, OptimizerKind, OptimizerState, ParamSet};
use crate::policy::{entropy, ArchConfig, Generator, ObservationWindow};
use crate::sim::{Action, ACTION_COUNT};
use crate::{Error, Result, SimRng};
use alloc::vec;
use alloc::vec::Vec;
use rand::seq::SliceRandom;

#[derive(Clone, Copy, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(default))]
pub struct PpoConfig {
    pub clip_ratio: f64,
    pub gamma: f64,
    pub gae_lambda: f64,
    pub epochs: usize,
    pub minibatch: usize,
    pub value_coef: f64,
    pub entropy_coef: f64,
    pub lr: f64,
    pub value_lr: f64,
    /// Global gradient norm cap; zero disables clipping.
    pub max_grad_norm: f64,
}

impl Default for PpoConfig {
    fn default() -> Self {
        PpoConfig {
            clip_ratio: 0.2,
            gamma: 0.99,
            gae_lambda: 0.95,
            epochs: 4,
            minibatch: 256,
            value_coef: 0.5,
            entropy_coef: 0.01,
            lr: 3e-4,
            value_lr: 1e-3,
            max_grad_norm: 0.5,
        }
    }
}

impl PpoConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |msg: &str| Err(Error::InvalidConfig(msg.into()));
        if !(self.clip_ratio > 0.0 && self.clip_ratio < 1.0) {
            return bad("clip_ratio must lie in (0, 1)");
        }
        if !((0.0..=1.0).contains(&self.gamma) && (0.0..=1.0).contains(&self.gae_lambda)) {
            return bad("gamma and gae_lambda must lie in [0, 1]");
        }
        if self.epochs == 0 || self.minibatch == 0 {
            return bad("epochs and minibatch must be positive");
        }
        if !(self.lr > 0.0 && self.value_lr > 0.0) {
            return bad("learning rates must be positive");
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct RolloutStep {
    pub window: ObservationWindow,
    pub action: Action,
    pub log_prob_old: f64,
    pub reward: f64,
    pub value: f64,
    /// Last step of an episode.
    pub done: bool,
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct Rollout {
    pub steps: Vec<RolloutStep>,
}

impl Rollout {
    pub fn len(&self) -> usize {
        self.steps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.steps.is_empty()
    }
}

/// GAE over a sequence of (possibly several) episodes. The value after a
/// `done` step, and after the last step, is taken as zero.
pub fn compute_advantages(
    rewards: &[f64],
    values: &[f64],
    dones: &[bool],
    gamma: f64,
    lambda: f64,
) -> Result<(Vec<f64>, Vec<f64>)> {
    let n = rewards.len();
    if values.len() != n || dones.len() != n {
        return Err(Error::ShapeMismatch {
            expected: n,
            actual: if values.len() != n { values.len() } else { dones.len() },
        });
    }
    let mut adv = vec![0.0; n];
    let mut next_adv = 0.0;
    let mut next_value = 0.0;
    for t in (0..n).rev() {
        let live = if dones[t] { 0.0 } else { 1.0 };
        let delta = rewards[t] + gamma * live * next_value - values[t];
        next_adv = delta + gamma * lambda * live * next_adv;
        adv[t] = next_adv;
        next_value = values[t];
    }
    let returns = adv.iter().zip(values).map(|(a, v)| a + v).collect();
    Ok((adv, returns))
}

/// Zero mean, unit variance; a constant vector becomes all zeros.
pub fn normalize(xs: &mut [f64]) {
    if xs.is_empty() {
        return;
    }
    let m = math::mean(xs);
    let s = math::std_pop(xs);
    for x in xs.iter_mut() {
        *x = if s > 1e-12 { (*x - m) / s } else { 0.0 };
    }
}

/// State-value network: the generator trunk with one linear output.
#[derive(Clone, Debug, PartialEq)]
pub struct ValueNet {
    pub arch: ArchConfig,
    pub net: Network,
}

impl ValueNet {
    pub fn new(arch: ArchConfig) -> Result<Self> {
        Ok(ValueNet {
            arch,
            net: Network::new(arch.trunk(1))?,
        })
    }

    pub fn init_params(&self, seed: u64) -> ParamSet {
        self.net.init_params(seed, self.arch.head_gain)
    }

    pub fn forward(&self, params: &ParamSet, window: &ObservationWindow) -> Result<f64> {
        let v = self.net.predict(params, &window.data)?[0];
        if !v.is_finite() {
            return Err(Error::NonFiniteValue("value"));
        }
        Ok(v)
    }

    /// Mean of `coef · (V − target)²` and its gradient.
    pub fn loss_and_grad(
        &self,
        params: &ParamSet,
        windows: &[&ObservationWindow],
        targets: &[f64],
        coef: f64,
    ) -> Result<(f64, Vec<f64>)> {
        if windows.is_empty() {
            return Err(Error::EmptyBatch);
        }
        let n = windows.len() as f64;
        let mut grads = vec![0.0; self.net.param_count()];
        let mut loss = 0.0;
        for (w, &target) in windows.iter().zip(targets) {
            let cache = self.net.forward(params, &w.data)?;
            let err = cache.output()[0] - target;
            loss += coef * err * err / n;
            self.net
                .backward_into(params, &cache, &[2.0 * coef * err / n], &mut grads)?;
        }
        Ok((loss, grads))
    }
}

/// One sample of the policy objective.
#[derive(Clone, Copy, Debug)]
pub struct PolicySample<'a> {
    pub window: &'a ObservationWindow,
    pub action: Action,
    pub log_prob_old: f64,
    pub advantage: f64,
}

#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct PolicyTerms {
    /// Mean clipped surrogate.
    pub surrogate: f64,
    pub entropy: f64,
    pub mean_ratio: f64,
    /// Fraction of samples whose ratio left the clip interval.
    pub clip_fraction: f64,
}

/// `min(ρA, clip(ρ, 1 − ε, 1 + ε)A)` and whether the unclipped term is the
/// minimum (the only case with a non-zero gradient in ρ).
pub fn clipped_surrogate(ratio: f64, advantage: f64, clip_ratio: f64) -> (f64, bool) {
    let unclipped = ratio * advantage;
    let clipped = ratio.clamp(1.0 - clip_ratio, 1.0 + clip_ratio) * advantage;
    if unclipped <= clipped {
        (unclipped, true)
    } else {
        (clipped, false)
    }
}

/// Policy loss `-(surrogate + entropy_coef · entropy)` averaged over the
/// batch, its parameter gradient and the individual terms.
pub fn policy_loss_and_grad(
    gen: &Generator,
    params: &ParamSet,
    batch: &[PolicySample<'_>],
    clip_ratio: f64,
    entropy_coef: f64,
) -> Result<(f64, Vec<f64>, PolicyTerms)> {
    if batch.is_empty() {
        return Err(Error::EmptyBatch);
    }
    let n = batch.len() as f64;
    let mut grads = vec![0.0; gen.net.param_count()];
    let mut terms = PolicyTerms::default();
    for s in batch {
        let cache = gen.net.forward(params, &s.window.data)?;
        let probs = cache.output();
        let a = s.action.index();
        let p = probs[a];
        let ratio = math::exp(math::ln(p) - s.log_prob_old);
        let (surrogate, active) = clipped_surrogate(ratio, s.advantage, clip_ratio);
        terms.surrogate += surrogate / n;
        let mut gp = [0.0; ACTION_COUNT];
        if active {
            gp[a] -= ratio * s.advantage / p / n;
        }
        if (ratio - 1.0).abs() > clip_ratio {
            terms.clip_fraction += 1.0 / n;
        }
        terms.mean_ratio += ratio / n;
        terms.entropy += entropy(probs) / n;
        for (g, &q) in gp.iter_mut().zip(probs) {
            if q > 0.0 {
                *g += entropy_coef * (math::ln(q) + 1.0) / n;
            }
        }
        gen.net.backward_into(params, &cache, &gp, &mut grads)?;
    }
    let loss = -(terms.surrogate + entropy_coef * terms.entropy);
    Ok((loss, grads, terms))
}

#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct PpoStats {
    /// Mean clipped surrogate over the last epoch.
    pub surrogate: f64,
    pub value_loss: f64,
    pub entropy: f64,
    pub mean_ratio: f64,
    pub clip_fraction: f64,
    /// Mean KL(π_old ‖ π_new) over the rollout after the update.
    pub approx_kl: f64,
}

/// Optimizer moments for the policy and value networks.
#[derive(Clone, Debug, PartialEq)]
pub struct PpoOptimizers {
    pub policy: OptimizerState,
    pub value: OptimizerState,
}

impl PpoOptimizers {
    pub fn new(gen: &Generator, value: &ValueNet) -> Self {
        PpoOptimizers {
            policy: OptimizerState::new(OptimizerKind::adam(), gen.net.param_count()),
            value: OptimizerState::new(OptimizerKind::adam(), value.net.param_count()),
        }
    }
}

/// Mean KL divergence between the policy at `old` and at `new` over the
/// rollout windows.
pub fn mean_kl(gen: &Generator, old: &ParamSet, new: &ParamSet, rollout: &Rollout) -> Result<f64> {
    if rollout.is_empty() {
        return Ok(0.0);
    }
    let mut total = 0.0;
    for s in &rollout.steps {
        let p = gen.probs(old, &s.window)?;
        let q = gen.probs(new, &s.window)?;
        total += p
            .iter()
            .zip(&q)
            .filter(|(&pi, _)| pi > 0.0)
            .map(|(&pi, &qi)| pi * (math::ln(pi) - math::ln(qi.max(1e-300))))
            .sum::<f64>();
    }
    Ok(total / rollout.len() as f64)
}

/// `epochs` shuffled minibatch passes over the rollout. Parameters and
/// optimizer state are only written back if every step stayed finite.
#[allow(clippy::too_many_arguments)]
pub fn ppo_update(
    gen: &Generator,
    value_net: &ValueNet,
    policy_params: &mut ParamSet,
    value_params: &mut ParamSet,
    opts: &mut PpoOptimizers,
    rollout: &Rollout,
    cfg: &PpoConfig,
    rng: &mut SimRng,
) -> Result<PpoStats> {
    if rollout.is_empty() {
        return Err(Error::EmptyBatch);
    }
    let rewards: Vec<f64> = rollout.steps.iter().map(|s| s.reward).collect();
    let values: Vec<f64> = rollout.steps.iter().map(|s| s.value).collect();
    let dones: Vec<bool> = rollout.steps.iter().map(|s| s.done).collect();
    let (mut adv, returns) = compute_advantages(&rewards, &values, &dones, cfg.gamma, cfg.gae_lambda)?;
    normalize(&mut adv);

    let mut pp = policy_params.clone();
    let mut vp = value_params.clone();
    let mut new_opts = opts.clone();
    let mut order: Vec<usize> = (0..rollout.len()).collect();
    let mut stats = PpoStats::default();
    for _ in 0..cfg.epochs {
        order.shuffle(rng);
        let mut epoch = PpoStats::default();
        let mut batches = 0.0;
        for chunk in order.chunks(cfg.minibatch) {
            let batch: Vec<PolicySample<'_>> = chunk
                .iter()
                .map(|&i| PolicySample {
                    window: &rollout.steps[i].window,
                    action: rollout.steps[i].action,
                    log_prob_old: rollout.steps[i].log_prob_old,
                    advantage: adv[i],
                })
                .collect();
            let (loss, mut g, terms) =
                policy_loss_and_grad(gen, &pp, &batch, cfg.clip_ratio, cfg.entropy_coef)?;
            if !loss.is_finite() {
                return Err(Error::NonFiniteValue("policy loss"));
            }
            if cfg.max_grad_norm > 0.0 {
                clip_grad_norm(&mut g, cfg.max_grad_norm);
            }
            update(&mut pp, &g, &mut new_opts.policy, cfg.lr)?;

            let windows: Vec<&ObservationWindow> = chunk.iter().map(|&i| &rollout.steps[i].window).collect();
            let targets: Vec<f64> = chunk.iter().map(|&i| returns[i]).collect();
            let (vloss, mut vg) = value_net.loss_and_grad(&vp, &windows, &targets, cfg.value_coef)?;
            if !vloss.is_finite() {
                return Err(Error::NonFiniteValue("value loss"));
            }
            if cfg.max_grad_norm > 0.0 {
                clip_grad_norm(&mut vg, cfg.max_grad_norm);
            }
            update(&mut vp, &vg, &mut new_opts.value, cfg.value_lr)?;

            epoch.surrogate += terms.surrogate;
            epoch.entropy += terms.entropy;
            epoch.mean_ratio += terms.mean_ratio;
            epoch.clip_fraction += terms.clip_fraction;
            epoch.value_loss += vloss;
            batches += 1.0;
        }
        stats = PpoStats {
            surrogate: epoch.surrogate / batches,
            value_loss: epoch.value_loss / batches,
            entropy: epoch.entropy / batches,
            mean_ratio: epoch.mean_ratio / batches,
            clip_fraction: epoch.clip_fraction / batches,
            approx_kl: 0.0,
        };
    }
    if !pp.is_finite() || !vp.is_finite() {
        return Err(Error::NonFiniteValue("parameters"));
    }
    stats.approx_kl = mean_kl(gen, policy_params, &pp, rollout)?;
    *policy_params = pp;
    *value_params = vp;
    *opts = new_opts;
    Ok(stats)
}
