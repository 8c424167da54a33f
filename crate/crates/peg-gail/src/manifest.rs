use crate::{Error, Result};
use peg_gail_core::trainer::TrainConfig;
use serde::{Deserialize, Serialize};
use std::path::{Path, PathBuf};

pub const MANIFEST_FILE: &str = "manifest.json";

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Artifacts {
    pub metrics_csv: PathBuf,
    pub checkpoint_dir: PathBuf,
    pub final_checkpoint: PathBuf,
}

/// Written before training starts; rerunning from it alone reproduces the
/// run.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub tool_version: String,
    pub seed: u64,
    pub config: TrainConfig,
    pub demos: Vec<PathBuf>,
    pub resumed_from: Option<PathBuf>,
    pub artifacts: Artifacts,
}

impl RunManifest {
    pub fn save(&self, path: &Path) -> Result<()> {
        let text = serde_json::to_string_pretty(self)?;
        crate::codec::write_atomic(path, text.as_bytes())
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Ok(serde_json::from_str(&text)?)
    }
}
