//! Expert dataset assembly from a directory of demonstration files.
//! Operator recordings are discretized on load.

use crate::episode_file::{load_episode, EPISODE_EXT};
use crate::teleop_file::{load_teleop, TELEOP_EXT};
use crate::{Error, Result};
use peg_gail_core::demos::{build_expert_dataset, discretize_teleop, DatasetWarning, DemoDataset, Thresholds};
use peg_gail_core::episode::Episode;
use std::path::{Path, PathBuf};

/// Demonstration files in `dir`, sorted by name.
pub fn demo_files(dir: &Path) -> Result<Vec<PathBuf>> {
    let entries = std::fs::read_dir(dir).map_err(|_| Error::DatasetNotFound(dir.to_path_buf()))?;
    let mut files: Vec<PathBuf> = entries
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| {
            p.extension()
                .and_then(|x| x.to_str())
                .is_some_and(|x| x == EPISODE_EXT || x == TELEOP_EXT)
        })
        .collect();
    files.sort();
    if files.is_empty() {
        return Err(Error::DatasetNotFound(dir.to_path_buf()));
    }
    Ok(files)
}

pub fn load_demo(path: &Path, th: &Thresholds) -> Result<Episode> {
    if path.extension().and_then(|x| x.to_str()) == Some(TELEOP_EXT) {
        Ok(discretize_teleop(&load_teleop(path)?.record, th)?)
    } else {
        Ok(load_episode(path)?.episode)
    }
}

pub fn load_dataset(files: &[PathBuf], th: &Thresholds) -> Result<(DemoDataset, Vec<DatasetWarning>)> {
    if files.is_empty() {
        return Err(peg_gail_core::Error::EmptyDataset.into());
    }
    let sources = files
        .iter()
        .map(|p| Ok((p.display().to_string(), load_demo(p, th)?)))
        .collect::<Result<Vec<_>>>()?;
    Ok(build_expert_dataset(sources)?)
}
