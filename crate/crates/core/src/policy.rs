//! The generator: a time-window observation history mapped to one of the
//! four discrete actions.

use crate::math;
use crate::nn::{LayerSpec, Network, ParamSet, NORM_EPS};
use crate::sim::{Action, Pose, Wrench, ACTION_COUNT};
use crate::{Error, Result, SimRng};
use alloc::collections::VecDeque;
use alloc::vec;
use alloc::vec::Vec;
use rand::Rng;

/// pose (6) + sensed f_x, f_y, f_z, m_x, m_y (5) + previous action (4)
pub const CHANNELS: usize = 15;
const POSE_AT: usize = 0;
const WRENCH_AT: usize = 6;
const ACTION_AT: usize = 11;

/// Layer sizes shared by the generator, value and discriminator networks.
#[derive(Clone, Copy, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(default))]
pub struct ArchConfig {
    /// Time steps per observation window.
    pub window: usize,
    pub conv_filters: usize,
    pub conv_kernel: usize,
    pub hidden: usize,
    pub norm_eps: f64,
    /// When false the sensed wrench channels are zeroed.
    pub use_wrench: bool,
    /// Scale of the output layer's initial weights.
    pub head_gain: f64,
}

impl Default for ArchConfig {
    fn default() -> Self {
        ArchConfig {
            window: 10,
            conv_filters: 16,
            conv_kernel: 3,
            hidden: 64,
            norm_eps: NORM_EPS,
            use_wrench: true,
            head_gain: 1.0,
        }
    }
}

impl ArchConfig {
    /// Normalization, time convolution and two hidden dense layers ending in
    /// `outputs` linear units.
    pub fn trunk(&self, outputs: usize) -> Vec<LayerSpec> {
        let conv_out = (self.window + 1 - self.conv_kernel) * self.conv_filters;
        vec![
            LayerSpec::NormTime {
                window: self.window,
                channels: CHANNELS,
                eps: self.norm_eps,
                passthrough: 0,
            },
            LayerSpec::Conv1dTime {
                window: self.window,
                in_channels: CHANNELS,
                filters: self.conv_filters,
                kernel: self.conv_kernel,
            },
            LayerSpec::Relu { size: conv_out },
            LayerSpec::Dense {
                inputs: conv_out,
                outputs: self.hidden,
            },
            LayerSpec::Relu { size: self.hidden },
            LayerSpec::Dense {
                inputs: self.hidden,
                outputs: self.hidden,
            },
            LayerSpec::Relu { size: self.hidden },
            LayerSpec::Dense {
                inputs: self.hidden,
                outputs,
            },
        ]
    }
}

/// One time step of the observation: what the policy saw before acting.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Frame {
    pub pose: Pose,
    pub sensed: Wrench,
    pub prev_action: Action,
}

impl Frame {
    pub fn row(&self, use_wrench: bool) -> [f64; CHANNELS] {
        let mut row = [0.0; CHANNELS];
        row[POSE_AT..POSE_AT + 6].copy_from_slice(&self.pose.0);
        if use_wrench {
            let w = self.sensed.to_array();
            row[WRENCH_AT..WRENCH_AT + 5].copy_from_slice(&w[..5]);
        }
        row[ACTION_AT..ACTION_AT + ACTION_COUNT].copy_from_slice(&self.prev_action.one_hot());
        row
    }
}

/// Row-major `window × CHANNELS` matrix, oldest row first.
#[derive(Clone, Debug, PartialEq)]
pub struct ObservationWindow {
    pub window: usize,
    pub data: Vec<f64>,
}

impl ObservationWindow {
    pub fn row(&self, t: usize) -> &[f64] {
        &self.data[t * CHANNELS..(t + 1) * CHANNELS]
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }
}

/// Ring of the most recent `window` frames. Before `window` frames have been
/// seen the oldest slots repeat the first frame.
#[derive(Clone, Debug)]
pub struct HistoryBuffer {
    window: usize,
    use_wrench: bool,
    rows: VecDeque<[f64; CHANNELS]>,
}

impl HistoryBuffer {
    pub fn new(window: usize, use_wrench: bool) -> Self {
        HistoryBuffer {
            window,
            use_wrench,
            rows: VecDeque::with_capacity(window),
        }
    }

    pub fn window(&self) -> usize {
        self.window
    }

    /// Appends a frame and returns the current window.
    pub fn observe(&mut self, pose: Pose, sensed: Wrench, prev_action: Action) -> ObservationWindow {
        self.push(&Frame {
            pose,
            sensed,
            prev_action,
        });
        self.current()
    }

    pub fn push(&mut self, frame: &Frame) {
        let row = frame.row(self.use_wrench);
        if self.rows.is_empty() {
            for _ in 0..self.window {
                self.rows.push_back(row);
            }
        } else {
            self.rows.pop_front();
            self.rows.push_back(row);
        }
    }

    pub fn current(&self) -> ObservationWindow {
        let mut data = Vec::with_capacity(self.window * CHANNELS);
        for row in &self.rows {
            data.extend_from_slice(row);
        }
        ObservationWindow {
            window: self.window,
            data,
        }
    }
}

/// Rebuilds the window seen at every step of a frame sequence.
pub fn windows_from_frames(frames: &[Frame], window: usize, use_wrench: bool) -> Vec<ObservationWindow> {
    let mut buf = HistoryBuffer::new(window, use_wrench);
    frames
        .iter()
        .map(|f| {
            buf.push(f);
            buf.current()
        })
        .collect()
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ActMode {
    Sample,
    Argmax,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PolicyDecision {
    pub action: Action,
    pub log_prob: f64,
    pub probs: [f64; ACTION_COUNT],
}

/// Picks the most probable action; ties go to the lowest code.
pub fn argmax_action(probs: &[f64; ACTION_COUNT]) -> Action {
    let mut best = 0;
    for i in 1..ACTION_COUNT {
        if probs[i] > probs[best] {
            best = i;
        }
    }
    Action::ALL[best]
}

/// Draws from the categorical distribution `probs` with one uniform variate.
pub fn sample_action(probs: &[f64; ACTION_COUNT], rng: &mut SimRng) -> Action {
    let u: f64 = rng.random();
    let mut acc = 0.0;
    for (i, p) in probs.iter().enumerate() {
        acc += p;
        if u < acc {
            return Action::ALL[i];
        }
    }
    // Rounding left `acc` just under one; fall back to the last non-zero.
    let last = probs.iter().rposition(|&p| p > 0.0).unwrap_or(ACTION_COUNT - 1);
    Action::ALL[last]
}

pub fn entropy(probs: &[f64]) -> f64 {
    probs
        .iter()
        .filter(|&&p| p > 0.0)
        .map(|&p| -p * math::ln(p))
        .sum()
}

/// The policy network: trunk with a 4-way softmax head.
#[derive(Clone, Debug, PartialEq)]
pub struct Generator {
    pub arch: ArchConfig,
    pub net: Network,
}

impl Generator {
    pub fn new(arch: ArchConfig) -> Result<Self> {
        let mut layers = arch.trunk(ACTION_COUNT);
        layers.push(LayerSpec::Softmax { size: ACTION_COUNT });
        Ok(Generator {
            arch,
            net: Network::new(layers)?,
        })
    }

    pub fn init_params(&self, seed: u64) -> ParamSet {
        self.net.init_params(seed, self.arch.head_gain)
    }

    pub fn history(&self) -> HistoryBuffer {
        HistoryBuffer::new(self.arch.window, self.arch.use_wrench)
    }

    pub fn probs(&self, params: &ParamSet, window: &ObservationWindow) -> Result<[f64; ACTION_COUNT]> {
        let out = self.net.predict(params, &window.data)?;
        let mut probs = [0.0; ACTION_COUNT];
        probs.copy_from_slice(&out);
        if !probs.iter().all(|p| p.is_finite()) {
            return Err(Error::NonFiniteValue("logits"));
        }
        Ok(probs)
    }

    pub fn act(
        &self,
        params: &ParamSet,
        window: &ObservationWindow,
        rng: &mut SimRng,
        mode: ActMode,
    ) -> Result<PolicyDecision> {
        let probs = self.probs(params, window)?;
        Ok(decide(probs, rng, mode))
    }
}

/// Turns a probability vector into a decision.
pub fn decide(probs: [f64; ACTION_COUNT], rng: &mut SimRng, mode: ActMode) -> PolicyDecision {
    let action = match mode {
        ActMode::Sample => sample_action(&probs, rng),
        ActMode::Argmax => argmax_action(&probs),
    };
    PolicyDecision {
        action,
        log_prob: math::ln(probs[action.index()]),
        probs,
    }
}
