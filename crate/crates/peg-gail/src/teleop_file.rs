//! Continuous operator recordings on disk.

use crate::codec::{self, Reader, Writer};
use crate::container::Container;
use crate::episode_file::{get_six, get_status, get_wrench, put_six, put_status, put_wrench};
use crate::Result;
use peg_gail_core::demos::{TeleopRecord, TeleopTick};
use peg_gail_core::sim::{HoleGeom, Pose};
use std::path::Path;

pub const TELEOP_VERSION: u32 = 1;
pub const TELEOP_EXT: &str = "pgtr";

#[derive(Clone, Debug, PartialEq)]
pub struct TeleopFile {
    pub record: TeleopRecord,
    pub geom: HoleGeom,
    pub tick_hz: f64,
}

fn encode_tick(t: &TeleopTick) -> Vec<u8> {
    let mut w = Writer::new();
    w.f64(t.timestamp);
    put_wrench(&mut w, &t.command);
    put_six(&mut w, &t.pose.0);
    put_wrench(&mut w, &t.sensed);
    w.f64(t.depth);
    put_status(&mut w, t.status);
    w.buf
}

fn decode_tick(bytes: &[u8]) -> Result<TeleopTick> {
    let mut r = Reader::new(bytes);
    let t = TeleopTick {
        timestamp: r.f64()?,
        command: get_wrench(&mut r)?,
        pose: Pose(get_six(&mut r)?),
        sensed: get_wrench(&mut r)?,
        depth: r.f64()?,
        status: get_status(&mut r)?,
    };
    r.finish()?;
    Ok(t)
}

impl TeleopFile {
    pub fn to_bytes(&self) -> Vec<u8> {
        let mut c = Container::new();
        c.set("seed", self.record.seed);
        c.set("tick_hz", self.tick_hz);
        c.set("geometry", serde_json::to_string(&self.geom).expect("geometry serializes"));
        c.records = self.record.ticks.iter().map(encode_tick).collect();
        c.encode("teleop", TELEOP_VERSION)
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<TeleopFile> {
        let c = Container::decode(bytes, "teleop", TELEOP_VERSION)?;
        let ticks = c.records.iter().map(|r| decode_tick(r)).collect::<Result<_>>()?;
        Ok(TeleopFile {
            record: TeleopRecord {
                seed: c.parse("seed")?,
                ticks,
            },
            geom: serde_json::from_str(c.get("geometry")?)?,
            tick_hz: c.parse("tick_hz")?,
        })
    }
}

pub fn save_teleop(file: &TeleopFile, path: &Path) -> Result<()> {
    codec::write_atomic(path, &file.to_bytes())
}

pub fn load_teleop(path: &Path) -> Result<TeleopFile> {
    TeleopFile::from_bytes(&codec::read_file(path)?)
}
