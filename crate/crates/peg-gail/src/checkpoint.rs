//! Complete training state, enough to resume a run bit-identically. The
//! three parameter sets are stored as parameter blobs.

use crate::codec::{self, Reader, Writer};
use crate::container::Container;
use crate::episode_file::{decode_episode, encode_episode};
use crate::params_file::{params_from_bytes, params_to_bytes};
use crate::{Error, Result};
use peg_gail_core::discriminator::Discriminator;
use peg_gail_core::nn::{OptimizerKind, OptimizerState};
use peg_gail_core::policy::Generator;
use peg_gail_core::ppo::{PpoOptimizers, ValueNet};
use peg_gail_core::trainer::{TrainConfig, TrainState};
use std::collections::VecDeque;
use std::path::Path;

pub const CHECKPOINT_VERSION: u32 = 1;
pub const CHECKPOINT_EXT: &str = "pgck";

#[derive(Clone, Debug, PartialEq)]
pub struct Checkpoint {
    pub config: TrainConfig,
    pub state: TrainState,
}

fn encode_opt(o: &OptimizerState) -> Vec<u8> {
    let mut w = Writer::new();
    match o.kind {
        OptimizerKind::Sgd => w.u8(0),
        OptimizerKind::Adam { beta1, beta2, eps } => {
            w.u8(1);
            w.f64(beta1);
            w.f64(beta2);
            w.f64(eps);
        }
    }
    w.u64(o.steps);
    w.f64s(&o.m);
    w.f64s(&o.v);
    w.buf
}

fn decode_opt(bytes: &[u8]) -> Result<OptimizerState> {
    let mut r = Reader::new(bytes);
    let kind = match r.u8()? {
        0 => OptimizerKind::Sgd,
        1 => OptimizerKind::Adam {
            beta1: r.f64()?,
            beta2: r.f64()?,
            eps: r.f64()?,
        },
        t => return Err(Error::Malformed(format!("optimizer tag {t}"))),
    };
    let steps = r.u64()?;
    let m = r.f64s()?;
    let v = r.f64s()?;
    r.finish()?;
    Ok(OptimizerState { kind, m, v, steps })
}

/// Serializes without taking ownership of the state.
pub fn encode_checkpoint(config: &TrainConfig, s: &TrainState) -> Result<Vec<u8>> {
    let arch = config.arch;
    let gen = Generator::new(arch)?;
    let value = ValueNet::new(arch)?;
    let disc = Discriminator::new(arch)?;
    let mut c = Container::new();
    c.set("episode", s.episode);
    c.set("config", serde_json::to_string(config)?);
    let mut scalars = Writer::new();
    scalars.u64(s.episode as u64);
    scalars.f64(s.last_disc_loss);
    c.records = vec![
        params_to_bytes(&s.policy, gen.net.layers()),
        params_to_bytes(&s.value, value.net.layers()),
        params_to_bytes(&s.disc, disc.net.layers()),
        encode_opt(&s.ppo_opt.policy),
        encode_opt(&s.ppo_opt.value),
        encode_opt(&s.disc_opt),
        scalars.buf,
    ];
    for ep in &s.replay {
        let mut w = Writer::new();
        encode_episode(&mut w, ep);
        c.records.push(w.buf);
    }
    Ok(c.encode("checkpoint", CHECKPOINT_VERSION))
}

impl Checkpoint {
    pub fn to_bytes(&self) -> Result<Vec<u8>> {
        encode_checkpoint(&self.config, &self.state)
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Checkpoint> {
        let c = Container::decode(bytes, "checkpoint", CHECKPOINT_VERSION)?;
        let config: TrainConfig = serde_json::from_str(c.get("config")?)?;
        if c.records.len() < 7 {
            return Err(Error::Malformed("checkpoint has too few sections".into()));
        }
        let arch = config.arch;
        let gen = Generator::new(arch)?;
        let value = ValueNet::new(arch)?;
        let disc = Discriminator::new(arch)?;
        let mut scalars = Reader::new(&c.records[6]);
        let episode = scalars.u64()? as usize;
        let last_disc_loss = scalars.f64()?;
        scalars.finish()?;
        let replay = c.records[7..]
            .iter()
            .map(|b| {
                let mut r = Reader::new(b);
                let ep = decode_episode(&mut r)?;
                r.finish()?;
                Ok(ep)
            })
            .collect::<Result<VecDeque<_>>>()?;
        let state = TrainState {
            episode,
            policy: params_from_bytes(&c.records[0], gen.net.layers())?,
            value: params_from_bytes(&c.records[1], value.net.layers())?,
            disc: params_from_bytes(&c.records[2], disc.net.layers())?,
            ppo_opt: PpoOptimizers {
                policy: decode_opt(&c.records[3])?,
                value: decode_opt(&c.records[4])?,
            },
            disc_opt: decode_opt(&c.records[5])?,
            replay,
            last_disc_loss,
        };
        Ok(Checkpoint { config, state })
    }
}

pub fn save_checkpoint(ck: &Checkpoint, path: &Path) -> Result<()> {
    codec::write_atomic(path, &ck.to_bytes()?)
}

pub fn load_checkpoint(path: &Path) -> Result<Checkpoint> {
    Checkpoint::from_bytes(&codec::read_file(path)?)
}
