//! Expert demonstrations: a scripted expert, discretization of continuous
//! operator recordings, and dataset assembly.

use crate::discriminator::StateActionPair;
use crate::episode::{run_episode, Choice, Episode, EpisodeStep};
use crate::math;
use crate::policy::ArchConfig;
use crate::sim::{Action, Env, EpisodeStatus, HoleGeom, PegState, Pose, SimConfig, WiggleParams, Wrench};
use crate::{Error, Result};
use alloc::string::String;
use alloc::vec::Vec;
use core::fmt;

/// Ticks without progress before the expert starts wiggling.
pub const K_STUCK: u32 = 20;

/// Pushes straight down; wiggles while the peg has made no depth progress
/// for `k_stuck` ticks.
#[derive(Clone, Debug, PartialEq)]
pub struct ScriptedExpert {
    pub k_stuck: u32,
    pub progress_eps: f64,
    stuck: u32,
    last_depth: Option<f64>,
}

impl ScriptedExpert {
    pub fn new(k_stuck: u32, progress_eps: f64) -> Self {
        ScriptedExpert {
            k_stuck,
            progress_eps,
            stuck: 0,
            last_depth: None,
        }
    }

    pub fn from_config(cfg: &SimConfig) -> Self {
        ScriptedExpert::new(K_STUCK, cfg.progress_eps)
    }

    /// Consecutive ticks without progress seen so far.
    pub fn stuck_ticks(&self) -> u32 {
        self.stuck
    }

    pub fn act(&mut self, state: &PegState) -> Action {
        if state.status.is_terminal() {
            return Action::Idle;
        }
        if let Some(last) = self.last_depth {
            if state.depth - last >= self.progress_eps {
                self.stuck = 0;
            } else {
                self.stuck += 1;
            }
        }
        self.last_depth = Some(state.depth);
        if self.stuck >= self.k_stuck {
            Action::DownWiggle
        } else {
            Action::Down
        }
    }
}

/// One scripted demonstration from a reset with `seed`.
pub fn scripted_demo(config: &SimConfig, geom: &HoleGeom, arch: &ArchConfig, seed: u64) -> Result<Episode> {
    let mut env = Env::new(config.clone(), *geom, seed)?;
    let mut expert = ScriptedExpert::from_config(config);
    let (episode, _) = run_episode(&mut env, arch.window, arch.use_wrench, |_, state| {
        Ok(Choice {
            action: expert.act(state),
            log_prob: 0.0,
        })
    })?;
    Ok(episode)
}

/// One tick of a continuous operator recording.
#[derive(Clone, Debug, PartialEq)]
pub struct TeleopTick {
    /// Seconds since the recording started.
    pub timestamp: f64,
    /// Commanded wrench.
    pub command: Wrench,
    /// Pose before the command was applied.
    pub pose: Pose,
    /// Sensed wrench before the command was applied.
    pub sensed: Wrench,
    /// Depth after the tick, mm.
    pub depth: f64,
    pub status: EpisodeStatus,
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct TeleopRecord {
    pub seed: u64,
    pub ticks: Vec<TeleopTick>,
}

impl TeleopRecord {
    pub fn success(&self) -> bool {
        matches!(self.ticks.last().map(|t| t.status), Some(EpisodeStatus::Success { .. }))
    }
}

/// Default rolling window of the wiggle detector, ticks.
pub const ROLLING_WINDOW: usize = 10;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Thresholds {
    /// |f_z| above this sets the down bit, N.
    pub down: f64,
    /// Rolling standard deviation above this sets the wiggle bit, N or N·mm.
    pub wiggle: f64,
    /// Ticks in the rolling window.
    pub window: usize,
}

impl Default for Thresholds {
    fn default() -> Self {
        Thresholds::from_params(&WiggleParams::default(), ROLLING_WINDOW)
    }
}

impl Thresholds {
    pub fn from_params(p: &WiggleParams, window: usize) -> Self {
        Thresholds {
            down: p.down_force / 2.0,
            wiggle: p.wiggle_amplitude / 4.0,
            window,
        }
    }
}

/// Components of the command that can carry a wiggle.
fn wiggle_components(w: &Wrench) -> [f64; 5] {
    [w.force[0], w.force[1], w.moment[0], w.moment[1], w.moment[2]]
}

/// Maps a continuous recording onto the four discrete actions. A tick has
/// the wiggle bit when some lateral or rotational component varies over the
/// trailing window by more than the threshold and is itself above it.
/// Ticks before the start of the record count as zero command.
pub fn discretize_teleop(record: &TeleopRecord, th: &Thresholds) -> Result<Episode> {
    if record.ticks.is_empty() {
        return Err(Error::EmptyRecord);
    }
    for i in 1..record.ticks.len() {
        if !(record.ticks[i].timestamp > record.ticks[i - 1].timestamp) {
            return Err(Error::NonMonotoneTimestamps(i));
        }
    }
    let comps: Vec<[f64; 5]> = record.ticks.iter().map(|t| wiggle_components(&t.command)).collect();
    let window = th.window.max(1);
    let mut episode = Episode::new(record.seed);
    let mut column = Vec::with_capacity(window);
    for (i, tick) in record.ticks.iter().enumerate() {
        let start = (i + 1).saturating_sub(window);
        let wiggle = (0..5).any(|c| {
            if comps[i][c].abs() <= th.wiggle {
                return false;
            }
            column.clear();
            column.resize(window - (i + 1 - start), 0.0);
            column.extend(comps[start..=i].iter().map(|row| row[c]));
            math::std_pop(&column) > th.wiggle
        });
        let down = tick.command.force[2].abs() > th.down;
        episode.steps.push(EpisodeStep {
            pose: tick.pose,
            sensed: tick.sensed,
            action: Action::from_bits(down, wiggle),
            log_prob: 0.0,
            command: tick.command,
            depth: tick.depth,
            status: tick.status,
        });
    }
    Ok(episode)
}

/// A recording whose commands are the canonical continuous form of each
/// discrete action: `−F_down` for the down bit, `m_x` alternating `±A_w`
/// for the wiggle bit.
pub fn encode_discrete(episode: &Episode, params: &WiggleParams, tick_hz: f64) -> TeleopRecord {
    let ticks = episode
        .steps
        .iter()
        .enumerate()
        .map(|(i, s)| {
            let mut command = Wrench::ZERO;
            if s.action.has_down() {
                command.force[2] = -params.down_force;
            }
            if s.action.has_wiggle() {
                command.moment[0] = if i % 2 == 0 {
                    params.wiggle_amplitude
                } else {
                    -params.wiggle_amplitude
                };
            }
            TeleopTick {
                timestamp: i as f64 / tick_hz,
                command,
                pose: s.pose,
                sensed: s.sensed,
                depth: s.depth,
                status: s.status,
            }
        })
        .collect();
    TeleopRecord {
        seed: episode.seed,
        ticks,
    }
}

/// Nominal number of expert samples.
pub const NOMINAL_SAMPLES: usize = 500;

#[derive(Clone, Debug, PartialEq)]
pub enum DatasetWarning {
    /// The episode did not end in success and was left out.
    Excluded(String),
    /// The same source was listed more than once; its samples count again.
    Duplicate(String),
    /// Total sample count far from the nominal size.
    SampleCount(usize),
}

impl fmt::Display for DatasetWarning {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            DatasetWarning::Excluded(s) => write!(f, "{s}: episode did not succeed, excluded"),
            DatasetWarning::Duplicate(s) => write!(f, "{s}: listed more than once, samples counted again"),
            DatasetWarning::SampleCount(n) => {
                write!(f, "{n} expert samples, far from the nominal {NOMINAL_SAMPLES}")
            }
        }
    }
}

/// Successful demonstrations in discrete-action form.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct DemoDataset {
    pub episodes: Vec<Episode>,
}

impl DemoDataset {
    pub fn sample_count(&self) -> usize {
        self.episodes.iter().map(Episode::len).sum()
    }

    /// Every (window, action) pair in order.
    pub fn pairs(&self, arch: &ArchConfig) -> Vec<StateActionPair> {
        let mut out = Vec::with_capacity(self.sample_count());
        for ep in &self.episodes {
            let windows = ep.windows(arch.window, arch.use_wrench);
            out.extend(
                windows
                    .into_iter()
                    .zip(ep.actions())
                    .map(|(window, action)| StateActionPair { window, action }),
            );
        }
        out
    }
}

/// Keeps the successful episodes of `(source name, episode)` inputs.
pub fn build_expert_dataset(sources: Vec<(String, Episode)>) -> Result<(DemoDataset, Vec<DatasetWarning>)> {
    let mut warnings = Vec::new();
    let mut seen: Vec<String> = Vec::new();
    let mut dataset = DemoDataset::default();
    for (name, episode) in sources {
        if seen.contains(&name) {
            warnings.push(DatasetWarning::Duplicate(name.clone()));
        }
        if episode.success() && episode.fault.is_none() {
            dataset.episodes.push(episode);
        } else {
            warnings.push(DatasetWarning::Excluded(name.clone()));
        }
        seen.push(name);
    }
    if dataset.episodes.is_empty() {
        return Err(Error::EmptyDataset);
    }
    let n = dataset.sample_count();
    if n * 5 < NOMINAL_SAMPLES || n > NOMINAL_SAMPLES * 5 {
        warnings.push(DatasetWarning::SampleCount(n));
    }
    Ok((dataset, warnings))
}
