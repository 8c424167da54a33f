//! Recorded episodes: the unit of demonstration storage and of training
//! rollouts.

use crate::policy::{windows_from_frames, Frame, HistoryBuffer, ObservationWindow};
use crate::sim::{Action, Env, EpisodeStatus, PegState, Pose, Wrench};
use crate::Result;
use alloc::string::{String, ToString};
use alloc::vec::Vec;

/// What was observed before acting, what was done, and where it led.
#[derive(Clone, Debug, PartialEq)]
pub struct EpisodeStep {
    pub pose: Pose,
    pub sensed: Wrench,
    pub action: Action,
    /// Log-probability of `action` under the policy that chose it; zero for
    /// demonstrations.
    pub log_prob: f64,
    /// Target wrench sent to the controller.
    pub command: Wrench,
    /// Insertion depth after the tick, mm.
    pub depth: f64,
    pub status: EpisodeStatus,
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct Episode {
    pub seed: u64,
    pub steps: Vec<EpisodeStep>,
    /// Simulator fault that ended the episode early, if any.
    pub fault: Option<String>,
}

impl Episode {
    pub fn new(seed: u64) -> Self {
        Episode {
            seed,
            ..Episode::default()
        }
    }

    pub fn len(&self) -> usize {
        self.steps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.steps.is_empty()
    }

    pub fn final_status(&self) -> EpisodeStatus {
        self.steps
            .last()
            .map(|s| s.status)
            .unwrap_or(EpisodeStatus::Running)
    }

    pub fn success(&self) -> bool {
        matches!(self.final_status(), EpisodeStatus::Success { .. })
    }

    /// Ticks to insertion, or `cap` when the episode did not succeed.
    pub fn insertion_ticks(&self, cap: u32) -> u32 {
        match self.final_status() {
            EpisodeStatus::Success { ticks } => ticks,
            _ => cap,
        }
    }

    pub fn actions(&self) -> impl Iterator<Item = Action> + '_ {
        self.steps.iter().map(|s| s.action)
    }

    /// Observation frames: the previous action of step 0 is `Idle`.
    pub fn frames(&self) -> Vec<Frame> {
        let mut prev = Action::Idle;
        self.steps
            .iter()
            .map(|s| {
                let f = Frame {
                    pose: s.pose,
                    sensed: s.sensed,
                    prev_action: prev,
                };
                prev = s.action;
                f
            })
            .collect()
    }

    /// The observation window at every step.
    pub fn windows(&self, window: usize, use_wrench: bool) -> Vec<ObservationWindow> {
        windows_from_frames(&self.frames(), window, use_wrench)
    }
}

/// What a controller chose at one tick.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Choice {
    pub action: Action,
    pub log_prob: f64,
}

/// Runs `env` to a terminal status, asking `choose` for an action every
/// tick. Returns the episode and the observation window seen at each step.
/// A simulator error ends the episode early and is kept in `fault`; errors
/// from `choose` are returned.
pub fn run_episode<F>(
    env: &mut Env,
    window: usize,
    use_wrench: bool,
    mut choose: F,
) -> Result<(Episode, Vec<ObservationWindow>)>
where
    F: FnMut(&ObservationWindow, &PegState) -> Result<Choice>,
{
    let mut episode = Episode::new(env.seed);
    let mut windows = Vec::new();
    let mut history = HistoryBuffer::new(window, use_wrench);
    let mut pose = env.state.pose;
    let mut sensed = env.initial_sensed();
    let mut prev = Action::Idle;
    while !env.state.status.is_terminal() {
        let obs = history.observe(pose, sensed, prev);
        let choice = choose(&obs, &env.state)?;
        let (out, command) = match env.step_action(choice.action) {
            Ok(r) => r,
            Err(e) => {
                episode.fault = Some(e.to_string());
                break;
            }
        };
        episode.steps.push(EpisodeStep {
            pose,
            sensed,
            action: choice.action,
            log_prob: choice.log_prob,
            command,
            depth: out.state.depth,
            status: out.status,
        });
        windows.push(obs);
        pose = out.state.pose;
        sensed = out.sensed;
        prev = choice.action;
    }
    Ok((episode, windows))
}
