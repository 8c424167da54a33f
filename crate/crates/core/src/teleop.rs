//! Operator commands and telemetry for the live teleoperation loop. The
//! socket server lives in the std crate.

use crate::sim::{EpisodeStatus, Pose, SimConfig, Wrench};
use alloc::format;
use alloc::string::String;

/// Latest input from the operator.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(default))]
pub struct TeleopCommand {
    /// N
    pub fx: f64,
    /// N
    pub fy: f64,
    /// Constant downward force on or off.
    pub down: bool,
    /// N·mm
    pub mz: f64,
    pub record: bool,
    pub reset: bool,
}

/// Target wrench for a command plus a warning if anything was clipped.
#[derive(Clone, Debug, PartialEq)]
pub struct AppliedCommand {
    pub wrench: Wrench,
    pub warning: Option<String>,
}

fn clip(name: &str, v: f64, limit: f64, warning: &mut Option<String>) -> f64 {
    if !v.is_finite() {
        *warning = Some(format!("{name} is not finite; using 0"));
        return 0.0;
    }
    if v.abs() > limit {
        *warning = Some(format!("{name} = {v} exceeds limit {limit}; clipped"));
        return v.clamp(-limit, limit);
    }
    v
}

/// `(f_x, f_y, −F_down·[down], 0, 0, m_z)` with lateral forces clipped to
/// the controller force limit and `m_z` to the wiggle amplitude.
pub fn apply_command(cmd: &TeleopCommand, cfg: &SimConfig) -> AppliedCommand {
    let mut warning = None;
    let fx = clip("fx", cmd.fx, cfg.force_limit, &mut warning);
    let fy = clip("fy", cmd.fy, cfg.force_limit, &mut warning);
    let mz = clip("mz", cmd.mz, cfg.actions.wiggle_amplitude, &mut warning);
    let fz = if cmd.down { -cfg.actions.down_force } else { 0.0 };
    AppliedCommand {
        wrench: Wrench {
            force: [fx, fy, fz],
            moment: [0.0, 0.0, mz],
        },
        warning,
    }
}

/// One tick of state sent to the operator.
#[derive(Clone, Debug, PartialEq)]
pub struct TelemetryFrame {
    pub tick: u64,
    pub pose: Pose,
    pub sensed: Wrench,
    pub cmd: Wrench,
    pub status: EpisodeStatus,
    pub recording: bool,
}
