//! Per-episode training metrics as CSV.

use crate::{Error, Result};
use peg_gail_core::trainer::{insertion_time_series, EpisodeMetrics, TrainMetrics};
use serde::{Deserialize, Serialize};
use std::fs::{File, OpenOptions};
use std::io::Write;
use std::path::Path;

pub const METRICS_HEADER: [&str; 6] = [
    "episode",
    "gen_reward_mean",
    "disc_loss",
    "insertion_ticks",
    "success",
    "entropy",
];

#[derive(Debug, Serialize, Deserialize)]
struct Row {
    episode: usize,
    gen_reward_mean: f64,
    disc_loss: f64,
    insertion_ticks: u32,
    success: bool,
    entropy: f64,
}

impl From<&EpisodeMetrics> for Row {
    fn from(m: &EpisodeMetrics) -> Self {
        Row {
            episode: m.episode,
            gen_reward_mean: m.gen_reward_mean,
            disc_loss: m.disc_loss,
            insertion_ticks: m.insertion_ticks,
            success: m.success,
            entropy: m.entropy,
        }
    }
}

impl From<Row> for EpisodeMetrics {
    fn from(r: Row) -> Self {
        EpisodeMetrics {
            episode: r.episode,
            gen_reward_mean: r.gen_reward_mean,
            disc_loss: r.disc_loss,
            insertion_ticks: r.insertion_ticks,
            success: r.success,
            entropy: r.entropy,
        }
    }
}

/// Appends one row per episode, flushing each so a crash keeps every
/// finished episode.
pub struct MetricsWriter {
    inner: csv::Writer<File>,
}

impl MetricsWriter {
    /// Starts a new file with the header, or appends to an existing one.
    pub fn open(path: &Path, append: bool) -> Result<Self> {
        let exists = append && path.exists();
        let file = OpenOptions::new()
            .create(true)
            .append(append)
            .write(true)
            .truncate(!append)
            .open(path)
            .map_err(|e| Error::io(path, e))?;
        let inner = csv::WriterBuilder::new().has_headers(!exists).from_writer(file);
        Ok(MetricsWriter { inner })
    }

    pub fn push(&mut self, m: &EpisodeMetrics) -> Result<()> {
        self.inner.serialize(Row::from(m))?;
        self.inner.flush().map_err(|e| Error::io("metrics", e))
    }
}

pub fn write_metrics(path: &Path, metrics: &TrainMetrics) -> Result<()> {
    let mut w = MetricsWriter::open(path, false)?;
    for m in &metrics.rows {
        w.push(m)?;
    }
    Ok(())
}

pub fn read_metrics(path: &Path) -> Result<TrainMetrics> {
    let mut r = csv::Reader::from_path(path)?;
    let header: Vec<String> = r.headers()?.iter().map(str::to_string).collect();
    if header != METRICS_HEADER {
        return Err(Error::Malformed(format!("unexpected metrics header {header:?}")));
    }
    let rows = r
        .deserialize::<Row>()
        .map(|row| row.map(EpisodeMetrics::from).map_err(Error::from))
        .collect::<Result<_>>()?;
    Ok(TrainMetrics { rows })
}

/// Plot-ready insertion times: one row per episode with the trailing mean
/// over `window` episodes once enough have run.
pub fn write_time_series<W: Write>(out: W, metrics: &TrainMetrics, window: usize, tick_hz: f64) -> Result<()> {
    let ticks = metrics.insertion_ticks();
    let trailing = if ticks.len() >= window.max(1) {
        insertion_time_series(&ticks, window, tick_hz)
    } else {
        Vec::new()
    };
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["episode", "insertion_time_s", "trailing_mean_s", "success", "gen_reward_mean", "disc_loss"])?;
    for (i, m) in metrics.rows.iter().enumerate() {
        let mean = (i + 1)
            .checked_sub(window.max(1))
            .and_then(|j| trailing.get(j))
            .map(|v| v.to_string())
            .unwrap_or_default();
        w.write_record([
            m.episode.to_string(),
            (m.insertion_ticks as f64 / tick_hz).to_string(),
            mean,
            m.success.to_string(),
            m.gen_reward_mean.to_string(),
            m.disc_loss.to_string(),
        ])?;
    }
    w.flush().map_err(|e| Error::io("time series", e))
}
