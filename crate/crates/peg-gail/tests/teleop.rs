use peg_gail::dataset::load_dataset;
use peg_gail::teleop_file::load_teleop;
use peg_gail::teleop_server::{ClientMessage, ServerMessage, TeleopOptions, TeleopServer};
use peg_gail_core::demos::Thresholds;
use peg_gail_core::sim::{HoleGeom, SimConfig};
use peg_gail_core::teleop::TeleopCommand;
use peg_gail_core::trainer::{run_training, TrainConfig};
use std::net::TcpStream;
use std::path::Path;
use std::thread::{self, JoinHandle};
use std::time::Instant;
use tempfile::tempdir;
use tungstenite::stream::MaybeTlsStream;
use tungstenite::{Message, WebSocket};

type Client = WebSocket<MaybeTlsStream<TcpStream>>;

fn aligned() -> SimConfig {
    SimConfig {
        start_offset_range: 0.0,
        start_tilt_range: 0.0,
        ..SimConfig::default()
    }
}

fn start(sim: SimConfig, out: &Path, pace_hz: f64) -> (Client, JoinHandle<()>) {
    let server = TeleopServer::bind(
        "127.0.0.1:0",
        TeleopOptions {
            sim,
            geom: HoleGeom::default(),
            out: out.to_path_buf(),
            seed: 3,
            pace_hz: Some(pace_hz),
            max_sessions: Some(1),
        },
    )
    .unwrap();
    let addr = server.local_addr().unwrap();
    let handle = thread::spawn(move || server.serve().unwrap());
    let (ws, _) = tungstenite::connect(format!("ws://{addr}")).unwrap();
    (ws, handle)
}

fn send(ws: &mut Client, cmd: TeleopCommand) {
    let text = serde_json::to_string(&ClientMessage::Cmd(cmd)).unwrap();
    ws.send(Message::text(text)).unwrap();
}

fn next(ws: &mut Client) -> ServerMessage {
    loop {
        if let Message::Text(t) = ws.read().unwrap() {
            return serde_json::from_str(&t).unwrap();
        }
    }
}

struct Frame {
    tick: u64,
    pose: [f64; 6],
    cmd: [f64; 6],
    status: String,
    recording: bool,
}

fn next_frame(ws: &mut Client, warnings: &mut Vec<String>) -> Frame {
    loop {
        match next(ws) {
            ServerMessage::Frame {
                tick,
                pose,
                cmd,
                status,
                recording,
                ..
            } => {
                return Frame {
                    tick,
                    pose,
                    cmd,
                    status,
                    recording,
                }
            }
            ServerMessage::Warn { msg } => warnings.push(msg),
        }
    }
}

fn finish(mut ws: Client, handle: JoinHandle<()>) {
    ws.close(None).ok();
    while ws.read().is_ok() {}
    handle.join().unwrap();
}

#[test]
fn wire_format_matches_protocol() {
    let cmd: ClientMessage =
        serde_json::from_str(r#"{"type":"cmd","fx":1.5,"fy":0,"down":true,"mz":0,"record":false,"reset":false}"#).unwrap();
    assert_eq!(
        cmd,
        ClientMessage::Cmd(TeleopCommand {
            fx: 1.5,
            down: true,
            ..TeleopCommand::default()
        })
    );
    let warn = serde_json::to_value(ServerMessage::Warn { msg: "m".into() }).unwrap();
    assert_eq!(warn, serde_json::json!({"type": "warn", "msg": "m"}));
    let frame = serde_json::to_value(ServerMessage::Frame {
        tick: 1,
        pose: [0.0; 6],
        sensed: [0.0; 6],
        cmd: [0.0; 6],
        status: "running".into(),
        recording: false,
    })
    .unwrap();
    let keys: Vec<&str> = frame.as_object().unwrap().keys().map(|k| k.as_str()).collect();
    for k in ["type", "tick", "pose", "sensed", "cmd", "status", "recording"] {
        assert!(keys.contains(&k), "{k}");
    }
}

#[test]
fn command_after_frame_k_shows_in_frame_k_plus_one() {
    let dir = tempdir().unwrap();
    let (mut ws, handle) = start(SimConfig::default(), dir.path(), 20.0);
    let mut warnings = Vec::new();
    let first = next_frame(&mut ws, &mut warnings);
    // The simulator does not tick before a client connects.
    assert_eq!(first.tick, 1);
    let mut prev = first.tick;
    for i in 1..=8 {
        let fx = i as f64 * 0.5;
        send(
            &mut ws,
            TeleopCommand {
                fx,
                ..TeleopCommand::default()
            },
        );
        let f = next_frame(&mut ws, &mut warnings);
        assert_eq!(f.tick, prev + 1);
        assert_eq!(f.cmd[0], fx, "tick {}", f.tick);
        prev = f.tick;
    }
    finish(ws, handle);
}

#[test]
fn oversized_force_is_clipped_with_warning() {
    let dir = tempdir().unwrap();
    let sim = SimConfig::default();
    let limit = sim.force_limit;
    let (mut ws, handle) = start(sim, dir.path(), 50.0);
    let mut warnings = Vec::new();
    next_frame(&mut ws, &mut warnings);
    send(
        &mut ws,
        TeleopCommand {
            fx: 2.0 * limit,
            ..TeleopCommand::default()
        },
    );
    let f = next_frame(&mut ws, &mut warnings);
    assert_eq!(f.cmd[0], limit);
    assert!(warnings.iter().any(|w| w.contains("fx")), "{warnings:?}");
    ws.send(Message::text("not json")).unwrap();
    for _ in 0..3 {
        next_frame(&mut ws, &mut warnings);
    }
    assert!(warnings.iter().any(|w| w.contains("ignored")), "{warnings:?}");
    finish(ws, handle);
}

#[test]
fn recorded_push_is_monotone_and_trains() {
    let dir = tempdir().unwrap();
    let sim = aligned();
    let (mut ws, handle) = start(sim.clone(), dir.path(), 1000.0);
    let mut warnings = Vec::new();
    next_frame(&mut ws, &mut warnings);
    let push = TeleopCommand {
        down: true,
        record: true,
        ..TeleopCommand::default()
    };
    send(&mut ws, push);
    let mut heights = Vec::new();
    let mut recorded = false;
    loop {
        let f = next_frame(&mut ws, &mut warnings);
        recorded |= f.recording;
        if f.recording {
            heights.push(f.pose[2]);
        }
        if f.status == "success" {
            break;
        }
        assert!(f.tick < sim.max_ticks as u64, "no success");
    }
    assert!(recorded);
    assert!(heights.windows(2).all(|w| w[1] <= w[0]), "depth must not decrease");
    assert!(heights[0] > heights[heights.len() - 1]);
    send(
        &mut ws,
        TeleopCommand {
            record: false,
            ..push
        },
    );
    while next_frame(&mut ws, &mut warnings).recording {}
    finish(ws, handle);

    let path = dir.path().join("teleop_000.pgtr");
    let file = load_teleop(&path).unwrap();
    assert!(file.record.success());
    let (ds, _) = load_dataset(&[path], &Thresholds::default()).unwrap();
    assert_eq!(ds.episodes.len(), 1);
    assert!(ds.episodes[0].success());
    let mut cfg = TrainConfig {
        n_episodes: 1,
        disc_iters_per_round: 5,
        ..TrainConfig::default()
    };
    cfg.sim.max_ticks = 100;
    cfg.ppo.minibatch = 32;
    let (metrics, _) = run_training(&cfg, &ds, &mut ()).unwrap();
    assert_eq!(metrics.rows.len(), 1);
}

#[test]
fn disconnect_discards_unfinished_recording() {
    let dir = tempdir().unwrap();
    let (mut ws, handle) = start(SimConfig::default(), dir.path(), 200.0);
    let mut warnings = Vec::new();
    next_frame(&mut ws, &mut warnings);
    send(
        &mut ws,
        TeleopCommand {
            record: true,
            ..TeleopCommand::default()
        },
    );
    while !next_frame(&mut ws, &mut warnings).recording {}
    finish(ws, handle);
    assert_eq!(std::fs::read_dir(dir.path()).unwrap().count(), 0);
}

#[test]
fn reset_starts_a_new_episode() {
    let dir = tempdir().unwrap();
    let (mut ws, handle) = start(SimConfig::default(), dir.path(), 200.0);
    let mut warnings = Vec::new();
    let before = next_frame(&mut ws, &mut warnings).pose;
    send(
        &mut ws,
        TeleopCommand {
            reset: true,
            ..TeleopCommand::default()
        },
    );
    let moved = (0..10).any(|_| next_frame(&mut ws, &mut warnings).pose[..2] != before[..2]);
    assert!(moved);
    finish(ws, handle);
}

#[test]
fn tick_rate_holds_within_five_percent() {
    let dir = tempdir().unwrap();
    let hz = 100.0;
    let (mut ws, handle) = start(SimConfig::default(), dir.path(), hz);
    let mut warnings = Vec::new();
    let first = next_frame(&mut ws, &mut warnings);
    let t0 = Instant::now();
    let mut last = first.tick;
    while last < first.tick + 200 {
        let f = next_frame(&mut ws, &mut warnings);
        assert_eq!(f.tick, last + 1);
        last = f.tick;
    }
    let mean = t0.elapsed().as_secs_f64() / 200.0;
    assert!((mean * hz - 1.0).abs() <= 0.05, "mean interval {mean}");
    finish(ws, handle);
}
