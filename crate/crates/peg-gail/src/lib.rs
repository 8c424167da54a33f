//! Host side of the peg-in-hole imitation pipeline: file formats, run
//! directories, the teleoperation server and the command line.

pub mod checkpoint;
pub mod cli;
pub mod codec;
pub mod config;
pub mod container;
pub mod dataset;
mod error;
pub mod episode_file;
pub mod manifest;
pub mod metrics;
pub mod params_file;
pub mod replay;
pub mod teleop_file;
pub mod teleop_server;

pub use error::{Error, Result};
