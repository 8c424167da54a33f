//! Demonstration and rollout episodes on disk.

use crate::codec::{self, Reader, Writer};
use crate::container::Container;
use crate::{Error, Result};
use peg_gail_core::episode::{Episode, EpisodeStep};
use peg_gail_core::sim::{Action, EpisodeStatus, HoleGeom, Pose, Wrench};
use std::path::Path;

pub const EPISODE_VERSION: u32 = 1;
pub const EPISODE_EXT: &str = "pgep";

/// An episode with the setup it was recorded under.
#[derive(Clone, Debug, PartialEq)]
pub struct EpisodeFile {
    pub episode: Episode,
    pub geom: HoleGeom,
    pub tick_hz: f64,
}

pub(crate) fn put_six(w: &mut Writer, v: &[f64; 6]) {
    for &x in v {
        w.f64(x);
    }
}

pub(crate) fn get_six(r: &mut Reader<'_>) -> Result<[f64; 6]> {
    let mut v = [0.0; 6];
    for x in &mut v {
        *x = r.f64()?;
    }
    Ok(v)
}

pub(crate) fn put_wrench(w: &mut Writer, x: &Wrench) {
    put_six(w, &x.to_array());
}

pub(crate) fn get_wrench(r: &mut Reader<'_>) -> Result<Wrench> {
    Ok(Wrench::from_array(get_six(r)?))
}

pub(crate) fn put_status(w: &mut Writer, s: EpisodeStatus) {
    let (tag, ticks) = match s {
        EpisodeStatus::Running => (0, 0),
        EpisodeStatus::Success { ticks } => (1, ticks),
        EpisodeStatus::Timeout => (2, 0),
    };
    w.u8(tag);
    w.u32(ticks);
}

pub(crate) fn get_status(r: &mut Reader<'_>) -> Result<EpisodeStatus> {
    let tag = r.u8()?;
    let ticks = r.u32()?;
    match tag {
        0 => Ok(EpisodeStatus::Running),
        1 => Ok(EpisodeStatus::Success { ticks }),
        2 => Ok(EpisodeStatus::Timeout),
        t => Err(Error::Malformed(format!("status tag {t}"))),
    }
}

fn encode_step(s: &EpisodeStep) -> Vec<u8> {
    let mut w = Writer::new();
    put_six(&mut w, &s.pose.0);
    put_wrench(&mut w, &s.sensed);
    w.u8(s.action.code());
    w.f64(s.log_prob);
    put_wrench(&mut w, &s.command);
    w.f64(s.depth);
    put_status(&mut w, s.status);
    w.buf
}

fn decode_step(bytes: &[u8]) -> Result<EpisodeStep> {
    let mut r = Reader::new(bytes);
    let step = EpisodeStep {
        pose: Pose(get_six(&mut r)?),
        sensed: get_wrench(&mut r)?,
        action: Action::from_code(r.u8()?)?,
        log_prob: r.f64()?,
        command: get_wrench(&mut r)?,
        depth: r.f64()?,
        status: get_status(&mut r)?,
    };
    r.finish()?;
    Ok(step)
}

/// Episode without its setup, as embedded in checkpoints.
pub(crate) fn encode_episode(w: &mut Writer, ep: &Episode) {
    w.u64(ep.seed);
    match &ep.fault {
        Some(f) => {
            w.u8(1);
            w.str(f);
        }
        None => w.u8(0),
    }
    w.u64(ep.steps.len() as u64);
    for s in &ep.steps {
        w.bytes(&encode_step(s));
    }
}

pub(crate) fn decode_episode(r: &mut Reader<'_>) -> Result<Episode> {
    let seed = r.u64()?;
    let fault = match r.u8()? {
        0 => None,
        _ => Some(r.str()?),
    };
    let n = r.len(8)?;
    let steps = (0..n).map(|_| decode_step(r.bytes()?)).collect::<Result<_>>()?;
    Ok(Episode { seed, steps, fault })
}

impl EpisodeFile {
    pub fn to_bytes(&self) -> Vec<u8> {
        let mut c = Container::new();
        c.set("seed", self.episode.seed);
        c.set("tick_hz", self.tick_hz);
        c.set("geometry", serde_json::to_string(&self.geom).expect("geometry serializes"));
        if let Some(f) = &self.episode.fault {
            c.set("fault", serde_json::to_string(f).expect("string serializes"));
        }
        c.records = self.episode.steps.iter().map(encode_step).collect();
        c.encode("episode", EPISODE_VERSION)
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<EpisodeFile> {
        let c = Container::decode(bytes, "episode", EPISODE_VERSION)?;
        let fault = match c.get("fault") {
            Ok(f) => Some(serde_json::from_str(f)?),
            Err(_) => None,
        };
        let steps = c.records.iter().map(|r| decode_step(r)).collect::<Result<_>>()?;
        Ok(EpisodeFile {
            episode: Episode {
                seed: c.parse("seed")?,
                steps,
                fault,
            },
            geom: serde_json::from_str(c.get("geometry")?)?,
            tick_hz: c.parse("tick_hz")?,
        })
    }
}

pub fn save_episode(file: &EpisodeFile, path: &Path) -> Result<()> {
    codec::write_atomic(path, &file.to_bytes())
}

pub fn load_episode(path: &Path) -> Result<EpisodeFile> {
    EpisodeFile::from_bytes(&codec::read_file(path)?)
}
