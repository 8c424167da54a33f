//! Command-line entry points. Every command writes only below its `--out`
//! directory.

use crate::checkpoint::{encode_checkpoint, load_checkpoint, CHECKPOINT_EXT};
use crate::codec::write_atomic;
use crate::config::load_config;
use crate::dataset::{demo_files, load_dataset};
use crate::episode_file::{save_episode, EpisodeFile, EPISODE_EXT};
use crate::manifest::{Artifacts, RunManifest, MANIFEST_FILE};
use crate::metrics::{read_metrics, write_time_series, MetricsWriter};
use crate::replay::{replay_episode, replay_teleop};
use crate::teleop_file::TeleopFile;
use crate::teleop_server::{TeleopOptions, TeleopServer};
use crate::{Error, Result};
use clap::{Parser, Subcommand, ValueEnum};
use peg_gail_core::demos::{scripted_demo, Thresholds, ROLLING_WINDOW};
use peg_gail_core::episode::Episode;
use peg_gail_core::policy::{ActMode, Generator};
use peg_gail_core::trainer::{derive_seed, evaluate, EvalSummary, TrainConfig, TrainEvent, Trainer};
use std::io::Write;
use std::path::{Path, PathBuf};

#[derive(Debug, Parser)]
#[command(name = "peg-gail", version, about = "Adversarial imitation learning for simulated peg-in-hole insertion")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Train a policy against expert demonstrations.
    Train(TrainArgs),
    /// Run a checkpoint's policy on fresh resets.
    Eval(EvalArgs),
    /// Write demonstrations from the scripted expert.
    DemoScripted(DemoArgs),
    /// Serve the live teleoperation bridge.
    Teleop(TeleopArgs),
    /// Print the per-tick channels of an episode or recording as CSV.
    Replay(ReplayArgs),
    /// Turn a metrics CSV into a plot-ready insertion-time table.
    ExportMetrics(ExportArgs),
}

#[derive(Debug, clap::Args)]
pub struct TrainArgs {
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Number of training episodes.
    #[arg(long)]
    pub episodes: Option<usize>,
    #[arg(long, default_value = "demos")]
    pub demos: PathBuf,
    #[arg(long, default_value = "run")]
    pub out: PathBuf,
    /// Resume from this checkpoint; its config is used.
    #[arg(long)]
    pub checkpoint: Option<PathBuf>,
    /// Rerun exactly what a previous manifest describes.
    #[arg(long, conflicts_with_all = ["config", "seed", "episodes", "checkpoint"])]
    pub manifest: Option<PathBuf>,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
pub enum Mode {
    Argmax,
    Sample,
}

#[derive(Debug, clap::Args)]
pub struct EvalArgs {
    #[arg(long)]
    pub checkpoint: PathBuf,
    #[arg(long, default_value_t = 50)]
    pub episodes: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, value_enum, default_value = "argmax")]
    pub mode: Mode,
    /// Also write `eval.csv` and `eval_summary.json` here.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, clap::Args)]
pub struct DemoArgs {
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long, default_value_t = 8)]
    pub episodes: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, default_value = "demos")]
    pub out: PathBuf,
}

#[derive(Debug, clap::Args)]
pub struct TeleopArgs {
    #[arg(long, default_value = "127.0.0.1:8765")]
    pub bind: String,
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long, default_value = "teleop")]
    pub out: PathBuf,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
}

#[derive(Debug, clap::Args)]
pub struct ReplayArgs {
    /// Episode (.pgep) or operator recording (.pgtr).
    pub file: PathBuf,
    /// Write the CSV here instead of standard output.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, clap::Args)]
pub struct ExportArgs {
    /// A metrics CSV or a run directory containing `metrics.csv`.
    pub metrics: PathBuf,
    #[arg(long, default_value_t = 5)]
    pub window: usize,
    #[arg(long, default_value_t = 100.0)]
    pub tick_hz: f64,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

pub fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Train(a) => cmd_train(&a),
        Command::Eval(a) => cmd_eval(&a).map(|_| ()),
        Command::DemoScripted(a) => cmd_demo_scripted(&a),
        Command::Teleop(a) => cmd_teleop(&a),
        Command::Replay(a) => cmd_replay(&a),
        Command::ExportMetrics(a) => cmd_export(&a),
    }
}

fn create_dir(dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))
}

/// Reset seed of the `i`-th scripted demonstration.
pub fn demo_seed(seed: u64, i: usize) -> u64 {
    derive_seed(seed, i as u64, 5)
}

pub fn scripted_demos(cfg: &TrainConfig, n: usize, seed: u64) -> Result<Vec<Episode>> {
    (0..n)
        .map(|i| Ok(scripted_demo(&cfg.sim, &cfg.geom, &cfg.arch, demo_seed(seed, i))?))
        .collect()
}

pub fn checkpoint_path(out: &Path, episode: usize) -> PathBuf {
    out.join("checkpoints").join(format!("episode_{episode:03}.{CHECKPOINT_EXT}"))
}

pub fn cmd_train(a: &TrainArgs) -> Result<()> {
    let (cfg, files, resume) = match &a.manifest {
        Some(m) => {
            let man = RunManifest::load(m)?;
            if let Some(missing) = man.demos.iter().find(|p| !p.exists()) {
                return Err(Error::DatasetNotFound(missing.clone()));
            }
            (man.config, man.demos, man.resumed_from)
        }
        None => {
            let mut cfg = match &a.checkpoint {
                Some(ck) => load_checkpoint(ck)?.config,
                None => load_config(a.config.as_deref())?,
            };
            if let Some(s) = a.seed {
                cfg.seed = s;
            }
            if let Some(n) = a.episodes {
                cfg.n_episodes = n;
            }
            (cfg, demo_files(&a.demos)?, a.checkpoint.clone())
        }
    };
    cfg.validate()?;
    let th = Thresholds::from_params(&cfg.sim.actions, ROLLING_WINDOW);
    let (dataset, warnings) = load_dataset(&files, &th)?;
    for w in &warnings {
        eprintln!("warning: {w}");
    }

    create_dir(&a.out.join("checkpoints"))?;
    let metrics_csv = a.out.join("metrics.csv");
    let manifest = RunManifest {
        tool_version: env!("CARGO_PKG_VERSION").to_string(),
        seed: cfg.seed,
        config: cfg.clone(),
        demos: files.iter().map(|p| std::path::absolute(p).unwrap_or_else(|_| p.clone())).collect(),
        resumed_from: resume.clone(),
        artifacts: Artifacts {
            metrics_csv: metrics_csv.clone(),
            checkpoint_dir: a.out.join("checkpoints"),
            final_checkpoint: checkpoint_path(&a.out, cfg.n_episodes),
        },
    };
    manifest.save(&a.out.join(MANIFEST_FILE))?;

    let mut trainer = match &resume {
        Some(p) => Trainer::with_state(cfg.clone(), &dataset, load_checkpoint(p)?.state)?,
        None => Trainer::new(cfg.clone(), &dataset)?,
    };
    let start = trainer.state().episode;
    write_atomic(
        &checkpoint_path(&a.out, start),
        &encode_checkpoint(&cfg, trainer.state())?,
    )?;
    let mut writer = MetricsWriter::open(&metrics_csv, resume.is_some())?;
    eprintln!(
        "training {} episodes from episode {start}; {} expert samples",
        cfg.n_episodes.saturating_sub(start),
        trainer.expert_pool().len()
    );
    let out = a.out.clone();
    let mut observer = |e: &TrainEvent<'_>| -> peg_gail_core::Result<()> {
        if let TrainEvent::EpisodeDone { metrics, state } = e {
            let mut save = || -> Result<()> {
                writer.push(metrics)?;
                write_atomic(&checkpoint_path(&out, metrics.episode), &encode_checkpoint(&cfg, state)?)
            };
            save().map_err(|err| peg_gail_core::Error::Observer(err.to_string()))?;
            eprintln!(
                "episode {:3}  ticks {:5}  success {:5}  reward {:.3}  disc_loss {:.3}  entropy {:.3}",
                metrics.episode,
                metrics.insertion_ticks,
                metrics.success,
                metrics.gen_reward_mean,
                metrics.disc_loss,
                metrics.entropy
            );
        }
        Ok(())
    };
    trainer.run(&mut observer)?;
    println!(
        "done: metrics {} checkpoint {}",
        metrics_csv.display(),
        checkpoint_path(&a.out, trainer.state().episode).display()
    );
    Ok(())
}

pub fn cmd_eval(a: &EvalArgs) -> Result<EvalSummary> {
    let ck = load_checkpoint(&a.checkpoint)?;
    let cfg = &ck.config;
    let gen = Generator::new(cfg.arch)?;
    let mode = match a.mode {
        Mode::Argmax => ActMode::Argmax,
        Mode::Sample => ActMode::Sample,
    };
    let summary = evaluate(&gen, &ck.state.policy, &cfg.sim, &cfg.geom, a.episodes, a.seed, mode)?;
    let hz = cfg.sim.tick_hz;
    let report = serde_json::json!({
        "checkpoint": a.checkpoint,
        "episodes": summary.rows.len(),
        "success_rate": summary.success_rate(),
        "mean_time_s": summary.mean_time(hz),
        "p50_time_s": summary.percentile_time(0.5, hz),
        "p90_time_s": summary.percentile_time(0.9, hz),
    });
    println!("{report}");
    if let Some(out) = &a.out {
        create_dir(out)?;
        let mut w = csv::Writer::from_path(out.join("eval.csv"))?;
        w.write_record(["episode", "seed", "success", "insertion_ticks", "insertion_time_s"])?;
        for (i, r) in summary.rows.iter().enumerate() {
            w.write_record([
                i.to_string(),
                r.seed.to_string(),
                r.success.to_string(),
                r.insertion_ticks.to_string(),
                (r.insertion_ticks as f64 / hz).to_string(),
            ])?;
        }
        w.flush().map_err(|e| Error::io(out, e))?;
        write_atomic(&out.join("eval_summary.json"), serde_json::to_string_pretty(&report)?.as_bytes())?;
    }
    Ok(summary)
}

pub fn cmd_demo_scripted(a: &DemoArgs) -> Result<()> {
    let cfg = load_config(a.config.as_deref())?;
    cfg.sim.validate()?;
    cfg.geom.validate()?;
    create_dir(&a.out)?;
    let mut ok = 0;
    for (i, episode) in scripted_demos(&cfg, a.episodes, a.seed)?.into_iter().enumerate() {
        ok += usize::from(episode.success());
        let path = a.out.join(format!("demo_{i:03}.{EPISODE_EXT}"));
        save_episode(
            &EpisodeFile {
                episode,
                geom: cfg.geom,
                tick_hz: cfg.sim.tick_hz,
            },
            &path,
        )?;
    }
    println!("wrote {} demonstrations ({ok} successful) to {}", a.episodes, a.out.display());
    Ok(())
}

pub fn cmd_teleop(a: &TeleopArgs) -> Result<()> {
    let cfg = load_config(a.config.as_deref())?;
    let server = TeleopServer::bind(
        &a.bind,
        TeleopOptions {
            sim: cfg.sim,
            geom: cfg.geom,
            out: a.out.clone(),
            seed: a.seed,
            pace_hz: None,
            max_sessions: None,
        },
    )?;
    eprintln!("teleop: listening on ws://{}", server.local_addr()?);
    server.serve()
}

pub fn cmd_replay(a: &ReplayArgs) -> Result<()> {
    let bytes = crate::codec::read_file(&a.file)?;
    let mut out: Box<dyn Write> = match &a.out {
        Some(p) => Box::new(std::fs::File::create(p).map_err(|e| Error::io(p, e))?),
        None => Box::new(std::io::stdout().lock()),
    };
    match EpisodeFile::from_bytes(&bytes) {
        Ok(f) => replay_episode(&mut out, &f.episode),
        Err(Error::WrongKind { .. }) => replay_teleop(&mut out, &TeleopFile::from_bytes(&bytes)?.record),
        Err(e) => Err(e),
    }
}

pub fn cmd_export(a: &ExportArgs) -> Result<()> {
    let path = if a.metrics.is_dir() {
        a.metrics.join("metrics.csv")
    } else {
        a.metrics.clone()
    };
    let metrics = read_metrics(&path)?;
    match &a.out {
        Some(p) => {
            let f = std::fs::File::create(p).map_err(|e| Error::io(p, e))?;
            write_time_series(f, &metrics, a.window, a.tick_hz)
        }
        None => write_time_series(std::io::stdout().lock(), &metrics, a.window, a.tick_hz),
    }
}
