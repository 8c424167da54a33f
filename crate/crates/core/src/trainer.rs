//! The adversarial loop: roll out the generator, reward it with the
//! discriminator, update it with PPO, then retrain the discriminator on
//! balanced expert and generated batches.

use crate::demos::DemoDataset;
use crate::discriminator::{reward, DiscConfig, Discriminator, RewardForm, StateActionPair};
use crate::episode::{run_episode, Choice, Episode};
use crate::nn::{OptimizerState, ParamSet};
use crate::policy::{decide, entropy, ActMode, ArchConfig, Generator, ObservationWindow};
use crate::ppo::{ppo_update, PpoConfig, PpoOptimizers, PpoStats, Rollout, RolloutStep, ValueNet};
use crate::sim::{Env, HoleGeom, SimConfig};
use crate::{math, rng_from_seed, Error, Result};
use alloc::collections::VecDeque;
use alloc::vec;
use alloc::vec::Vec;
use rand::seq::SliceRandom;

#[derive(Clone, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(default))]
pub struct TrainConfig {
    pub n_episodes: usize,
    pub disc_iters_per_round: usize,
    /// Train the discriminator after every k-th episode.
    pub disc_update_every: usize,
    pub gen_updates_per_episode: usize,
    pub seed: u64,
    /// Episodes per point of the insertion-time curve.
    pub metric_window: usize,
    /// Expert pairs kept for discriminator training.
    pub expert_samples: usize,
    /// Recent episodes whose pairs feed the discriminator.
    pub replay_episodes: usize,
    pub reward_form: RewardForm,
    pub disc: DiscConfig,
    pub ppo: PpoConfig,
    pub arch: ArchConfig,
    pub sim: SimConfig,
    pub geom: HoleGeom,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            n_episodes: 20,
            disc_iters_per_round: 100,
            disc_update_every: 1,
            gen_updates_per_episode: 4,
            seed: 0,
            metric_window: 5,
            expert_samples: 500,
            replay_episodes: 3,
            reward_form: RewardForm::default(),
            disc: DiscConfig::default(),
            ppo: PpoConfig::default(),
            arch: ArchConfig::default(),
            sim: SimConfig::default(),
            geom: HoleGeom::default(),
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |msg: &str| Err(Error::InvalidConfig(msg.into()));
        if self.disc_iters_per_round == 0
            || self.disc_update_every == 0
            || self.gen_updates_per_episode == 0
            || self.metric_window == 0
            || self.expert_samples == 0
            || self.replay_episodes == 0
            || self.disc.minibatch == 0
        {
            return bad("training counts must be at least 1");
        }
        if !(self.disc.lr > 0.0) {
            return bad("discriminator learning rate must be positive");
        }
        if self.arch.window == 0 || self.arch.conv_kernel == 0 || self.arch.conv_kernel > self.arch.window {
            return bad("conv_kernel must lie in 1..=window");
        }
        self.ppo.validate()?;
        self.sim.validate()?;
        self.geom.validate()
    }
}

/// One row of the training log.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct EpisodeMetrics {
    /// 1-based.
    pub episode: usize,
    pub gen_reward_mean: f64,
    /// Loss after the most recent discriminator round; NaN before the first.
    pub disc_loss: f64,
    /// Ticks to success, or `max_ticks` on timeout or fault.
    pub insertion_ticks: u32,
    pub success: bool,
    /// Mean policy entropy over the episode, nats.
    pub entropy: f64,
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct TrainMetrics {
    pub rows: Vec<EpisodeMetrics>,
}

impl TrainMetrics {
    pub fn insertion_ticks(&self) -> Vec<u32> {
        self.rows.iter().map(|r| r.insertion_ticks).collect()
    }
}

/// Trailing means of `window` consecutive insertion times in seconds. A
/// window longer than the series gives the mean of the whole series.
pub fn insertion_time_series(ticks: &[u32], window: usize, tick_hz: f64) -> Vec<f64> {
    if ticks.is_empty() {
        return Vec::new();
    }
    let secs: Vec<f64> = ticks.iter().map(|&t| t as f64 / tick_hz).collect();
    let window = window.max(1);
    if window > secs.len() {
        return vec![math::mean(&secs)];
    }
    secs.windows(window).map(math::mean).collect()
}

/// Everything that changes during training. Together with the config and
/// the dataset it determines the rest of the run.
#[derive(Clone, Debug, PartialEq)]
pub struct TrainState {
    /// Episodes completed.
    pub episode: usize,
    pub policy: ParamSet,
    pub value: ParamSet,
    pub disc: ParamSet,
    pub ppo_opt: PpoOptimizers,
    pub disc_opt: OptimizerState,
    /// Most recent episodes, oldest first.
    pub replay: VecDeque<Episode>,
    pub last_disc_loss: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub enum TrainEvent<'a> {
    Collected {
        episode: usize,
        steps: usize,
    },
    PpoUpdate {
        episode: usize,
        update: usize,
        stats: PpoStats,
    },
    DiscRound {
        episode: usize,
        expert: usize,
        generated: usize,
        loss: f64,
    },
    EpisodeDone {
        metrics: EpisodeMetrics,
        state: &'a TrainState,
    },
}

/// Receives training progress in order. Returning an error stops training.
pub trait TrainObserver {
    fn on_event(&mut self, event: &TrainEvent<'_>) -> Result<()>;
}

impl TrainObserver for () {
    fn on_event(&mut self, _: &TrainEvent<'_>) -> Result<()> {
        Ok(())
    }
}

impl<F: FnMut(&TrainEvent<'_>) -> Result<()>> TrainObserver for F {
    fn on_event(&mut self, event: &TrainEvent<'_>) -> Result<()> {
        self(event)
    }
}

/// SplitMix64 of a (seed, episode, stream) triple.
pub fn derive_seed(seed: u64, episode: u64, stream: u64) -> u64 {
    let mut z = seed
        .wrapping_add(episode.wrapping_mul(0x9E37_79B9_7F4A_7C15))
        .wrapping_add(stream.wrapping_mul(0xD1B5_4A32_D192_ED03));
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

const STREAM_ENV: u64 = 0;
const STREAM_ACT: u64 = 1;
const STREAM_PPO: u64 = 2;
const STREAM_DISC: u64 = 3;
const STREAM_POOL: u64 = 4;

/// Reset seed of training episode `index` (0-based).
pub fn episode_seed(cfg: &TrainConfig, index: usize) -> u64 {
    derive_seed(cfg.seed, index as u64 + 1, STREAM_ENV)
}

pub struct Trainer {
    pub cfg: TrainConfig,
    pub gen: Generator,
    pub value_net: ValueNet,
    pub disc_net: Discriminator,
    expert_pool: Vec<StateActionPair>,
    state: TrainState,
}

impl Trainer {
    /// Fresh networks initialized from `cfg.seed`.
    pub fn new(cfg: TrainConfig, dataset: &DemoDataset) -> Result<Trainer> {
        let gen = Generator::new(cfg.arch)?;
        let value_net = ValueNet::new(cfg.arch)?;
        let disc_net = Discriminator::new(cfg.arch)?;
        let state = TrainState {
            episode: 0,
            policy: gen.init_params(derive_seed(cfg.seed, 0, 1)),
            value: value_net.init_params(derive_seed(cfg.seed, 0, 2)),
            disc: disc_net.init_params(derive_seed(cfg.seed, 0, 3)),
            ppo_opt: PpoOptimizers::new(&gen, &value_net),
            disc_opt: disc_net.optimizer(),
            replay: VecDeque::new(),
            last_disc_loss: f64::NAN,
        };
        Trainer::with_state(cfg, dataset, state)
    }

    /// Continues from a saved state.
    pub fn with_state(cfg: TrainConfig, dataset: &DemoDataset, state: TrainState) -> Result<Trainer> {
        cfg.validate()?;
        if dataset.episodes.is_empty() {
            return Err(Error::EmptyDataset);
        }
        let gen = Generator::new(cfg.arch)?;
        let value_net = ValueNet::new(cfg.arch)?;
        let disc_net = Discriminator::new(cfg.arch)?;
        let sizes = [
            (gen.net.param_count(), state.policy.len()),
            (value_net.net.param_count(), state.value.len()),
            (disc_net.net.param_count(), state.disc.len()),
        ];
        for (expected, actual) in sizes {
            if expected != actual {
                return Err(Error::ShapeMismatch { expected, actual });
            }
        }
        let mut pool = dataset.pairs(&cfg.arch);
        if pool.is_empty() {
            return Err(Error::EmptyDataset);
        }
        let mut rng = rng_from_seed(derive_seed(cfg.seed, 0, STREAM_POOL));
        pool.shuffle(&mut rng);
        pool.truncate(cfg.expert_samples);
        Ok(Trainer {
            cfg,
            gen,
            value_net,
            disc_net,
            expert_pool: pool,
            state,
        })
    }

    pub fn state(&self) -> &TrainState {
        &self.state
    }

    pub fn into_state(self) -> TrainState {
        self.state
    }

    pub fn expert_pool(&self) -> &[StateActionPair] {
        &self.expert_pool
    }

    /// Runs the remaining episodes up to `cfg.n_episodes`.
    pub fn run(&mut self, observer: &mut dyn TrainObserver) -> Result<TrainMetrics> {
        let mut metrics = TrainMetrics::default();
        while self.state.episode < self.cfg.n_episodes {
            metrics.rows.push(self.train_episode(observer)?);
        }
        Ok(metrics)
    }

    /// One collect / reward / PPO / discriminator iteration.
    pub fn train_episode(&mut self, observer: &mut dyn TrainObserver) -> Result<EpisodeMetrics> {
        let k = self.state.episode;
        let cfg = &self.cfg;
        let arch = cfg.arch;
        let mut env = Env::new(cfg.sim.clone(), cfg.geom, episode_seed(cfg, k))?;
        let mut act_rng = rng_from_seed(derive_seed(cfg.seed, k as u64 + 1, STREAM_ACT));
        let mut entropy_sum = 0.0;
        let gen = &self.gen;
        let policy = &self.state.policy;
        let (episode, windows) = run_episode(&mut env, arch.window, arch.use_wrench, |w, _| {
            let probs = gen.probs(policy, w)?;
            entropy_sum += entropy(&probs);
            let d = decide(probs, &mut act_rng, ActMode::Sample);
            Ok(Choice {
                action: d.action,
                log_prob: d.log_prob,
            })
        })?;
        observer.on_event(&TrainEvent::Collected {
            episode: k + 1,
            steps: episode.len(),
        })?;

        let mut rollout = Rollout::default();
        let mut reward_sum = 0.0;
        for (i, (window, step)) in windows.into_iter().zip(&episode.steps).enumerate() {
            let pair = StateActionPair {
                window,
                action: step.action,
            };
            let r = reward(self.disc_net.score(&self.state.disc, &pair)?, cfg.reward_form);
            reward_sum += r;
            rollout.steps.push(RolloutStep {
                window: pair.window,
                action: step.action,
                log_prob_old: step.log_prob,
                reward: r,
                value: 0.0,
                done: i + 1 == episode.len(),
            });
        }

        if !rollout.is_empty() {
            let mut ppo_rng = rng_from_seed(derive_seed(cfg.seed, k as u64 + 1, STREAM_PPO));
            for u in 0..cfg.gen_updates_per_episode {
                for s in rollout.steps.iter_mut() {
                    s.value = self.value_net.forward(&self.state.value, &s.window)?;
                }
                let stats = ppo_update(
                    &self.gen,
                    &self.value_net,
                    &mut self.state.policy,
                    &mut self.state.value,
                    &mut self.state.ppo_opt,
                    &rollout,
                    &cfg.ppo,
                    &mut ppo_rng,
                )?;
                observer.on_event(&TrainEvent::PpoUpdate {
                    episode: k + 1,
                    update: u + 1,
                    stats,
                })?;
            }
        }

        let metrics_base = EpisodeMetrics {
            episode: k + 1,
            gen_reward_mean: if episode.is_empty() {
                0.0
            } else {
                reward_sum / episode.len() as f64
            },
            disc_loss: f64::NAN,
            insertion_ticks: if episode.fault.is_some() {
                cfg.sim.max_ticks
            } else {
                episode.insertion_ticks(cfg.sim.max_ticks)
            },
            success: episode.success() && episode.fault.is_none(),
            entropy: if episode.is_empty() {
                0.0
            } else {
                entropy_sum / episode.len() as f64
            },
        };

        self.state.replay.push_back(episode);
        while self.state.replay.len() > cfg.replay_episodes {
            self.state.replay.pop_front();
        }

        if (k + 1).is_multiple_of(cfg.disc_update_every) {
            let (expert, generated, loss) = self.disc_round(k)?;
            self.state.last_disc_loss = loss;
            observer.on_event(&TrainEvent::DiscRound {
                episode: k + 1,
                expert,
                generated,
                loss,
            })?;
        }

        self.state.episode = k + 1;
        let metrics = EpisodeMetrics {
            disc_loss: self.state.last_disc_loss,
            ..metrics_base
        };
        observer.on_event(&TrainEvent::EpisodeDone {
            metrics,
            state: &self.state,
        })?;
        Ok(metrics)
    }

    /// Balanced batches: equally many expert and replayed generated pairs.
    fn disc_round(&mut self, k: usize) -> Result<(usize, usize, f64)> {
        let cfg = &self.cfg;
        let mut rng = rng_from_seed(derive_seed(cfg.seed, k as u64 + 1, STREAM_DISC));
        let mut generated: Vec<StateActionPair> = Vec::new();
        for ep in &self.state.replay {
            let windows: Vec<ObservationWindow> = ep.windows(cfg.arch.window, cfg.arch.use_wrench);
            generated.extend(
                windows
                    .into_iter()
                    .zip(ep.actions())
                    .map(|(window, action)| StateActionPair { window, action }),
            );
        }
        let n = generated.len().min(self.expert_pool.len());
        if n == 0 {
            return Err(Error::EmptyBatch);
        }
        generated.shuffle(&mut rng);
        generated.truncate(n);
        let mut expert = self.expert_pool.clone();
        expert.shuffle(&mut rng);
        expert.truncate(n);
        let loss = self.disc_net.train(
            &mut self.state.disc,
            &mut self.state.disc_opt,
            &expert,
            &generated,
            cfg.disc_iters_per_round,
            &cfg.disc,
            &mut rng,
        )?;
        if !loss.is_finite() {
            return Err(Error::NonFiniteValue("discriminator loss"));
        }
        Ok((expert.len(), generated.len(), loss))
    }
}

/// Trains from scratch for `cfg.n_episodes` episodes.
pub fn run_training(
    cfg: &TrainConfig,
    dataset: &DemoDataset,
    observer: &mut dyn TrainObserver,
) -> Result<(TrainMetrics, TrainState)> {
    let mut trainer = Trainer::new(cfg.clone(), dataset)?;
    let metrics = trainer.run(observer)?;
    Ok((metrics, trainer.into_state()))
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct EvalRow {
    pub seed: u64,
    pub success: bool,
    pub insertion_ticks: u32,
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct EvalSummary {
    pub rows: Vec<EvalRow>,
}

impl EvalSummary {
    pub fn success_rate(&self) -> f64 {
        if self.rows.is_empty() {
            return 0.0;
        }
        self.rows.iter().filter(|r| r.success).count() as f64 / self.rows.len() as f64
    }

    /// Mean insertion time in seconds, timeouts counted at the cap.
    pub fn mean_time(&self, tick_hz: f64) -> f64 {
        let secs: Vec<f64> = self.rows.iter().map(|r| r.insertion_ticks as f64 / tick_hz).collect();
        math::mean(&secs)
    }

    /// Nearest-rank percentile of the insertion time in seconds.
    pub fn percentile_time(&self, q: f64, tick_hz: f64) -> f64 {
        if self.rows.is_empty() {
            return f64::NAN;
        }
        let mut t: Vec<u32> = self.rows.iter().map(|r| r.insertion_ticks).collect();
        t.sort_unstable();
        let rank = math::ceil(q.clamp(0.0, 1.0) * t.len() as f64) as usize;
        t[rank.clamp(1, t.len()) - 1] as f64 / tick_hz
    }
}

/// Runs the policy on `episodes` resets derived from `seed`.
pub fn evaluate(
    gen: &Generator,
    params: &ParamSet,
    sim: &SimConfig,
    geom: &HoleGeom,
    episodes: usize,
    seed: u64,
    mode: ActMode,
) -> Result<EvalSummary> {
    let mut summary = EvalSummary::default();
    for i in 0..episodes {
        let env_seed = derive_seed(seed, i as u64, 7);
        let mut env = Env::new(sim.clone(), *geom, env_seed)?;
        let mut rng = rng_from_seed(derive_seed(seed, i as u64, 8));
        let (ep, _) = run_episode(&mut env, gen.arch.window, gen.arch.use_wrench, |w, _| {
            let d = gen.act(params, w, &mut rng, mode)?;
            Ok(Choice {
                action: d.action,
                log_prob: d.log_prob,
            })
        })?;
        let ok = ep.success() && ep.fault.is_none();
        summary.rows.push(EvalRow {
            seed: env_seed,
            success: ok,
            insertion_ticks: if ok { ep.insertion_ticks(sim.max_ticks) } else { sim.max_ticks },
        });
    }
    Ok(summary)
}
