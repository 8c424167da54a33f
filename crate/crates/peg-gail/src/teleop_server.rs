//! Live teleoperation bridge. One operator at a time connects over a
//! WebSocket; a network thread parses commands into a latest-value mailbox
//! and forwards telemetry, while the tick loop owns the simulator and runs
//! at wall-clock rate.

use crate::teleop_file::{save_teleop, TeleopFile, TELEOP_EXT};
use crate::{Error, Result};
use peg_gail_core::demos::{TeleopRecord, TeleopTick};
use peg_gail_core::sim::{Env, EpisodeStatus, HoleGeom, SimConfig, Wrench};
use peg_gail_core::teleop::{apply_command, TeleopCommand, TelemetryFrame};
use peg_gail_core::trainer::derive_seed;
use serde::{Deserialize, Serialize};
use std::io::ErrorKind;
use std::net::{SocketAddr, TcpListener, TcpStream};
use std::path::PathBuf;
use std::sync::atomic::{AtomicBool, Ordering};
use std::sync::mpsc::{self, Receiver, RecvTimeoutError, Sender};
use std::sync::{Arc, Mutex};
use std::thread;
use std::time::{Duration, Instant};
use tungstenite::{Message, WebSocket};

/// Client to server.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "lowercase")]
pub enum ClientMessage {
    Cmd(TeleopCommand),
}

/// Server to client.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "lowercase")]
pub enum ServerMessage {
    Frame {
        tick: u64,
        pose: [f64; 6],
        sensed: [f64; 6],
        cmd: [f64; 6],
        status: String,
        recording: bool,
    },
    Warn {
        msg: String,
    },
}

pub fn status_name(s: EpisodeStatus) -> &'static str {
    match s {
        EpisodeStatus::Running => "running",
        EpisodeStatus::Success { .. } => "success",
        EpisodeStatus::Timeout => "timeout",
    }
}

impl From<&TelemetryFrame> for ServerMessage {
    fn from(f: &TelemetryFrame) -> Self {
        ServerMessage::Frame {
            tick: f.tick,
            pose: f.pose.0,
            sensed: f.sensed.to_array(),
            cmd: f.cmd.to_array(),
            status: status_name(f.status).to_string(),
            recording: f.recording,
        }
    }
}

#[derive(Clone, Debug)]
pub struct TeleopOptions {
    pub sim: SimConfig,
    pub geom: HoleGeom,
    /// Recordings are written here.
    pub out: PathBuf,
    /// Base of the per-episode reset seeds.
    pub seed: u64,
    /// Wall-clock tick rate; defaults to the simulator rate.
    pub pace_hz: Option<f64>,
    /// Stop after this many sessions instead of serving forever.
    pub max_sessions: Option<usize>,
}

/// Latest command wins; a reset request survives until the tick loop
/// takes it.
#[derive(Default)]
struct Mailbox {
    cmd: TeleopCommand,
    reset: bool,
}

impl Mailbox {
    fn put(&mut self, cmd: TeleopCommand) {
        self.reset |= cmd.reset;
        self.cmd = cmd;
    }

    fn take(&mut self) -> (TeleopCommand, bool) {
        (self.cmd, std::mem::take(&mut self.reset))
    }
}

pub struct TeleopServer {
    listener: TcpListener,
    opts: TeleopOptions,
    recordings: usize,
}

impl TeleopServer {
    pub fn bind(addr: &str, opts: TeleopOptions) -> Result<TeleopServer> {
        opts.sim.validate()?;
        opts.geom.validate()?;
        std::fs::create_dir_all(&opts.out).map_err(|e| Error::io(&opts.out, e))?;
        let listener = TcpListener::bind(addr).map_err(|e| Error::io(addr, e))?;
        Ok(TeleopServer {
            listener,
            opts,
            recordings: 0,
        })
    }

    pub fn local_addr(&self) -> Result<SocketAddr> {
        self.listener.local_addr().map_err(|e| Error::io("listener", e))
    }

    /// Accepts sessions one after another. The simulator only runs while a
    /// client is connected.
    pub fn serve(mut self) -> Result<()> {
        let mut sessions = 0;
        while self.opts.max_sessions.is_none_or(|m| sessions < m) {
            let (stream, peer) = self.listener.accept().map_err(|e| Error::io("listener", e))?;
            eprintln!("teleop: session from {peer}");
            if let Err(e) = self.session(stream, sessions) {
                eprintln!("teleop: session ended: {e}");
            }
            sessions += 1;
        }
        Ok(())
    }

    fn session(&mut self, stream: TcpStream, index: usize) -> Result<()> {
        let ws = tungstenite::accept(stream).map_err(|e| Error::Teleop(format!("handshake failed: {e}")))?;
        ws.get_ref()
            .set_nonblocking(true)
            .map_err(|e| Error::io("socket", e))?;
        ws.get_ref().set_nodelay(true).ok();
        let mailbox = Arc::new(Mutex::new(Mailbox::default()));
        let connected = Arc::new(AtomicBool::new(true));
        let (tx, rx) = mpsc::channel::<ServerMessage>();
        let net = {
            let mailbox = Arc::clone(&mailbox);
            let connected = Arc::clone(&connected);
            let warn = tx.clone();
            thread::spawn(move || network_loop(ws, mailbox, connected, rx, warn))
        };
        let result = self.tick_loop(index, &mailbox, &connected, &tx);
        drop(tx);
        net.join().ok();
        result
    }

    fn tick_loop(
        &mut self,
        session: usize,
        mailbox: &Mutex<Mailbox>,
        connected: &AtomicBool,
        tx: &Sender<ServerMessage>,
    ) -> Result<()> {
        let opts = self.opts.clone();
        let period = Duration::from_secs_f64(1.0 / opts.pace_hz.unwrap_or(opts.sim.tick_hz));
        let mut episode = 0u64;
        let new_env = |episode: u64| {
            Env::new(
                opts.sim.clone(),
                opts.geom,
                derive_seed(opts.seed, session as u64, episode),
            )
        };
        let mut env = new_env(episode)?;
        let mut sensed = env.initial_sensed();
        let mut recording: Option<(TeleopRecord, u64)> = None;
        let mut tick = 0u64;
        let mut deadline = Instant::now();
        while connected.load(Ordering::Acquire) {
            deadline += period;
            if let Some(wait) = deadline.checked_duration_since(Instant::now()) {
                thread::sleep(wait);
            }
            tick += 1;
            let (cmd, reset) = mailbox.lock().expect("mailbox poisoned").take();
            if reset {
                episode += 1;
                env = new_env(episode)?;
                sensed = env.initial_sensed();
                if let Some((rec, _)) = recording.as_mut() {
                    *rec = TeleopRecord {
                        seed: env.seed,
                        ticks: Vec::new(),
                    };
                }
            }
            let applied = apply_command(&cmd, &opts.sim);
            if let Some(msg) = applied.warning {
                tx.send(ServerMessage::Warn { msg }).ok();
            }
            match (cmd.record, recording.is_some()) {
                (true, false) => {
                    recording = Some((
                        TeleopRecord {
                            seed: env.seed,
                            ticks: Vec::new(),
                        },
                        tick,
                    ))
                }
                (false, true) => {
                    let (rec, _) = recording.take().expect("recording");
                    self.save_recording(rec)?;
                }
                _ => {}
            }
            let mut cmd_wrench = Wrench::ZERO;
            if !env.state.status.is_terminal() {
                let before = (env.state.pose, sensed);
                let out = env.step_wrench(&applied.wrench)?;
                sensed = out.sensed;
                cmd_wrench = applied.wrench;
                if let Some((rec, start)) = recording.as_mut() {
                    rec.ticks.push(TeleopTick {
                        timestamp: (tick - *start) as f64 / opts.sim.tick_hz,
                        command: applied.wrench,
                        pose: before.0,
                        sensed: before.1,
                        depth: out.state.depth,
                        status: out.status,
                    });
                }
            }
            let frame = TelemetryFrame {
                tick,
                pose: env.state.pose,
                sensed,
                cmd: cmd_wrench,
                status: env.state.status,
                recording: recording.is_some(),
            };
            if tx.send(ServerMessage::from(&frame)).is_err() {
                break;
            }
        }
        // Disconnected: keep only a completed recording.
        if let Some((rec, _)) = recording {
            if rec.success() {
                self.save_recording(rec)?;
            }
        }
        Ok(())
    }

    fn save_recording(&mut self, record: TeleopRecord) -> Result<()> {
        if record.ticks.is_empty() {
            return Ok(());
        }
        let path = self
            .opts
            .out
            .join(format!("teleop_{:03}.{TELEOP_EXT}", self.recordings));
        self.recordings += 1;
        save_teleop(
            &TeleopFile {
                record,
                geom: self.opts.geom,
                tick_hz: self.opts.sim.tick_hz,
            },
            &path,
        )?;
        eprintln!("teleop: saved {}", path.display());
        Ok(())
    }
}

fn would_block(e: &tungstenite::Error) -> bool {
    matches!(e, tungstenite::Error::Io(io) if io.kind() == ErrorKind::WouldBlock)
}

fn network_loop(
    mut ws: WebSocket<TcpStream>,
    mailbox: Arc<Mutex<Mailbox>>,
    connected: Arc<AtomicBool>,
    rx: Receiver<ServerMessage>,
    warn: Sender<ServerMessage>,
) {
    let hang_up = |connected: &AtomicBool| connected.store(false, Ordering::Release);
    loop {
        loop {
            match ws.read() {
                Ok(Message::Text(text)) => match serde_json::from_str::<ClientMessage>(&text) {
                    Ok(ClientMessage::Cmd(cmd)) => mailbox.lock().expect("mailbox poisoned").put(cmd),
                    Err(e) => {
                        warn.send(ServerMessage::Warn {
                            msg: format!("ignored message: {e}"),
                        })
                        .ok();
                    }
                },
                Ok(Message::Close(_)) => {
                    hang_up(&connected);
                    ws.flush().ok();
                    return;
                }
                Ok(_) => {}
                Err(e) if would_block(&e) => break,
                Err(_) => {
                    hang_up(&connected);
                    return;
                }
            }
        }
        match rx.recv_timeout(Duration::from_millis(1)) {
            Ok(msg) => {
                let mut next = Some(msg);
                while let Some(m) = next {
                    let text = serde_json::to_string(&m).expect("message serializes");
                    match ws.send(Message::text(text)) {
                        Ok(()) => {}
                        Err(e) if would_block(&e) => {}
                        Err(_) => {
                            hang_up(&connected);
                            return;
                        }
                    }
                    next = rx.try_recv().ok();
                }
            }
            Err(RecvTimeoutError::Timeout) => {
                if let Err(e) = ws.flush() {
                    if !would_block(&e) {
                        hang_up(&connected);
                        return;
                    }
                }
            }
            Err(RecvTimeoutError::Disconnected) => {
                ws.close(None).ok();
                ws.flush().ok();
                return;
            }
        }
    }
}
