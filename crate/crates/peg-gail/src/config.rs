//! TOML run configuration. Every field is optional; missing ones take the
//! built-in defaults, so the simulator sections double as a sim-only config.

use crate::{Error, Result};
use peg_gail_core::trainer::TrainConfig;
use std::path::Path;

pub fn parse_config(text: &str) -> Result<TrainConfig> {
    Ok(toml::from_str(text)?)
}

/// The defaults when `path` is `None`.
pub fn load_config(path: Option<&Path>) -> Result<TrainConfig> {
    match path {
        None => Ok(TrainConfig::default()),
        Some(p) => {
            let text = std::fs::read_to_string(p).map_err(|e| Error::io(p, e))?;
            parse_config(&text)
        }
    }
}

pub fn config_to_toml(cfg: &TrainConfig) -> String {
    toml::to_string_pretty(cfg).expect("config serializes")
}
