//! Per-tick channel export of a recorded episode for external plotting.

use crate::{Error, Result};
use peg_gail_core::demos::TeleopRecord;
use peg_gail_core::episode::Episode;
use peg_gail_core::sim::{Pose, Wrench};
use std::io::Write;

/// Commanded wrench, tip height, roll and pitch, measured wrench.
pub const REPLAY_COLUMNS: [&str; 15] = [
    "u_fx", "u_fy", "u_fz", "u_mx", "u_my", "u_mz", "p_z", "r_x", "r_y", "f_x", "f_y", "f_z", "m_x", "m_y", "m_z",
];

fn row(command: &Wrench, pose: &Pose, sensed: &Wrench) -> [String; 15] {
    let u = command.to_array();
    let f = sensed.to_array();
    let p = &pose.0;
    let vals = [
        u[0], u[1], u[2], u[3], u[4], u[5], p[2], p[3], p[4], f[0], f[1], f[2], f[3], f[4], f[5],
    ];
    vals.map(|v| v.to_string())
}

fn write_rows<W: Write>(out: W, rows: impl Iterator<Item = [String; 15]>) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(REPLAY_COLUMNS)?;
    for r in rows {
        w.write_record(&r)?;
    }
    w.flush().map_err(|e| Error::io("replay output", e))
}

pub fn replay_episode<W: Write>(out: W, ep: &Episode) -> Result<()> {
    write_rows(out, ep.steps.iter().map(|s| row(&s.command, &s.pose, &s.sensed)))
}

pub fn replay_teleop<W: Write>(out: W, rec: &TeleopRecord) -> Result<()> {
    write_rows(out, rec.ticks.iter().map(|t| row(&t.command, &t.pose, &t.sensed)))
}
