use peg_gail::checkpoint::{load_checkpoint, save_checkpoint, Checkpoint};
use peg_gail::config::{config_to_toml, load_config, parse_config};
use peg_gail::container::Container;
use peg_gail::dataset::{demo_files, load_dataset};
use peg_gail::episode_file::{load_episode, save_episode, EpisodeFile};
use peg_gail::metrics::{read_metrics, write_metrics, write_time_series, METRICS_HEADER};
use peg_gail::params_file::{load_params, params_from_bytes, params_to_bytes, save_params};
use peg_gail::replay::{replay_episode, replay_teleop, REPLAY_COLUMNS};
use peg_gail::teleop_file::{load_teleop, save_teleop, TeleopFile};
use peg_gail::Error;
use peg_gail_core::demos::{encode_discrete, scripted_demo, Thresholds};
use peg_gail_core::discriminator::RewardForm;
use peg_gail_core::episode::Episode;
use peg_gail_core::policy::Generator;
use peg_gail_core::ppo::ValueNet;
use peg_gail_core::sim::HoleGeom;
use peg_gail_core::trainer::{EpisodeMetrics, TrainConfig, TrainMetrics, Trainer};
use proptest::prelude::*;
use tempfile::tempdir;

fn demo(seed: u64) -> EpisodeFile {
    let cfg = TrainConfig::default();
    EpisodeFile {
        episode: scripted_demo(&cfg.sim, &cfg.geom, &cfg.arch, seed).unwrap(),
        geom: cfg.geom,
        tick_hz: cfg.sim.tick_hz,
    }
}

fn small_cfg(n_episodes: usize) -> TrainConfig {
    let mut cfg = TrainConfig {
        n_episodes,
        disc_iters_per_round: 10,
        seed: 7,
        ..TrainConfig::default()
    };
    cfg.sim.max_ticks = 150;
    cfg.ppo.minibatch = 64;
    cfg
}

#[test]
fn episode_round_trips_bit_exact() {
    let dir = tempdir().unwrap();
    let path = dir.path().join("d.pgep");
    let f = demo(3);
    save_episode(&f, &path).unwrap();
    let back = load_episode(&path).unwrap();
    assert_eq!(back, f);
    assert_eq!(back.to_bytes(), f.to_bytes());
}

#[test]
fn faulted_and_empty_episodes_round_trip() {
    let mut f = demo(1);
    f.episode.fault = Some("non-finite state".into());
    assert_eq!(EpisodeFile::from_bytes(&f.to_bytes()).unwrap(), f);
    let empty = EpisodeFile {
        episode: Episode::new(5),
        ..f
    };
    assert_eq!(EpisodeFile::from_bytes(&empty.to_bytes()).unwrap(), empty);
}

#[test]
fn flipped_byte_is_detected() {
    let bytes = demo(2).to_bytes();
    let at = bytes.len() / 2;
    let mut bad = bytes.clone();
    bad[at] ^= 0x40;
    assert!(EpisodeFile::from_bytes(&bad).is_err());
    let mut bad = bytes;
    let last = bad.len() - 1;
    bad[last] ^= 1;
    assert!(matches!(EpisodeFile::from_bytes(&bad), Err(Error::Checksum)));
}

#[test]
fn truncation_is_detected() {
    let bytes = demo(2).to_bytes();
    for cut in [0, 10, bytes.len() / 3, bytes.len() - 1] {
        assert!(EpisodeFile::from_bytes(&bytes[..cut]).is_err(), "cut {cut}");
    }
}

#[test]
fn version_and_kind_are_checked() {
    let mut c = Container::new();
    c.set("seed", 1);
    let bytes = c.encode("episode", 99);
    assert!(matches!(
        EpisodeFile::from_bytes(&bytes),
        Err(Error::VersionMismatch { found: 99, expected: 1 })
    ));
    let teleop = TeleopFile {
        record: encode_discrete(&demo(0).episode, &TrainConfig::default().sim.actions, 100.0),
        geom: HoleGeom::default(),
        tick_hz: 100.0,
    };
    assert!(matches!(
        EpisodeFile::from_bytes(&teleop.to_bytes()),
        Err(Error::WrongKind { .. })
    ));
}

#[test]
fn container_round_trips_header_and_records() {
    let mut c = Container::new();
    c.set("a", "x y z");
    c.set("n", 42);
    c.records = vec![vec![], vec![1, 2, 3], vec![0; 1000]];
    let back = Container::decode(&c.encode("test", 3), "test", 3).unwrap();
    assert_eq!(back, c);
    assert_eq!(back.parse::<u32>("n").unwrap(), 42);
    assert!(back.get("missing").is_err());
}

#[test]
fn teleop_record_round_trips_and_discretizes() {
    let dir = tempdir().unwrap();
    let path = dir.path().join("t.pgtr");
    let cfg = TrainConfig::default();
    let ep = demo(4).episode;
    let f = TeleopFile {
        record: encode_discrete(&ep, &cfg.sim.actions, cfg.sim.tick_hz),
        geom: cfg.geom,
        tick_hz: cfg.sim.tick_hz,
    };
    save_teleop(&f, &path).unwrap();
    assert_eq!(load_teleop(&path).unwrap(), f);
    let (ds, _) = load_dataset(&[path], &Thresholds::default()).unwrap();
    assert!(ds.episodes[0].actions().eq(ep.actions()));
}

#[test]
fn params_round_trip_and_reject_other_layouts() {
    let arch = TrainConfig::default().arch;
    let gen = Generator::new(arch).unwrap();
    let value = ValueNet::new(arch).unwrap();
    let p = gen.init_params(3);
    let bytes = params_to_bytes(&p, gen.net.layers());
    assert_eq!(&bytes[..8], b"PGPARAMS");
    assert_eq!(params_from_bytes(&bytes, gen.net.layers()).unwrap(), p);
    assert!(matches!(
        params_from_bytes(&bytes, value.net.layers()),
        Err(Error::SpecMismatch { .. })
    ));
    let mut bad = bytes.clone();
    bad[40] ^= 0xff;
    assert!(matches!(params_from_bytes(&bad, gen.net.layers()), Err(Error::Checksum)));
    assert!(params_from_bytes(&bytes[..bytes.len() - 9], gen.net.layers()).is_err());

    let dir = tempdir().unwrap();
    let path = dir.path().join("p.pgps");
    save_params(&p, gen.net.layers(), &path).unwrap();
    assert_eq!(load_params(&path, gen.net.layers()).unwrap(), p);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn any_corruption_fails_cleanly(at in 0usize..4096, bit in 0u8..8) {
        let bytes = demo(6).to_bytes();
        let mut bad = bytes.clone();
        let i = at % bad.len();
        bad[i] ^= 1 << bit;
        prop_assert!(EpisodeFile::from_bytes(&bad).is_err());
    }
}

#[test]
fn checkpoint_resume_through_files_is_bit_identical() {
    let cfg = small_cfg(3);
    let ds = peg_gail_core::demos::build_expert_dataset(vec![("d".into(), demo(1).episode)])
        .unwrap()
        .0;
    let mut full = Trainer::new(cfg.clone(), &ds).unwrap();
    let full_rows = full.run(&mut ()).unwrap();

    let dir = tempdir().unwrap();
    let path = dir.path().join("ck.pgck");
    let mut first = Trainer::new(cfg.clone(), &ds).unwrap();
    first.train_episode(&mut ()).unwrap();
    first.train_episode(&mut ()).unwrap();
    let ck = Checkpoint {
        config: cfg,
        state: first.into_state(),
    };
    save_checkpoint(&ck, &path).unwrap();
    let loaded = load_checkpoint(&path).unwrap();
    assert_eq!(loaded, ck);

    let mut resumed = Trainer::with_state(loaded.config, &ds, loaded.state).unwrap();
    let tail = resumed.run(&mut ()).unwrap();
    assert_eq!(tail.rows, full_rows.rows[2..]);
    assert_eq!(resumed.state(), full.state());
}

#[test]
fn corrupt_checkpoint_is_rejected() {
    let ds = peg_gail_core::demos::build_expert_dataset(vec![("d".into(), demo(1).episode)])
        .unwrap()
        .0;
    let cfg = small_cfg(1);
    let t = Trainer::new(cfg.clone(), &ds).unwrap();
    let bytes = Checkpoint {
        config: cfg,
        state: t.into_state(),
    }
    .to_bytes()
    .unwrap();
    let mut bad = bytes.clone();
    let at = bytes.len() - 100;
    bad[at] ^= 0x10;
    assert!(Checkpoint::from_bytes(&bad).is_err());
    assert!(Checkpoint::from_bytes(&bytes[..bytes.len() / 2]).is_err());
}

#[test]
fn config_toml_round_trips() {
    let mut cfg = TrainConfig {
        seed: 11,
        reward_form: RewardForm::LogD,
        ..TrainConfig::default()
    };
    cfg.geom.clearance = 0.1;
    let text = config_to_toml(&cfg);
    assert_eq!(parse_config(&text).unwrap(), cfg);
}

#[test]
fn partial_config_fills_defaults() {
    let cfg = parse_config("seed = 3\nn_episodes = 5\n[sim]\nmax_ticks = 200\n").unwrap();
    assert_eq!(cfg.seed, 3);
    assert_eq!(cfg.n_episodes, 5);
    assert_eq!(cfg.sim.max_ticks, 200);
    assert_eq!(cfg.sim.tick_hz, TrainConfig::default().sim.tick_hz);
    assert_eq!(cfg.ppo, TrainConfig::default().ppo);
    assert_eq!(load_config(None).unwrap(), TrainConfig::default());
    assert!(matches!(parse_config("seed = \"x\""), Err(Error::Config(_))));
}

#[test]
fn metrics_csv_round_trips() {
    let dir = tempdir().unwrap();
    let path = dir.path().join("m.csv");
    let rows: Vec<EpisodeMetrics> = (1..=6)
        .map(|i| EpisodeMetrics {
            episode: i,
            gen_reward_mean: 0.5 + i as f64 * 0.01,
            disc_loss: if i == 1 { 0.42 } else { 0.1 / i as f64 },
            insertion_ticks: 3000 - 100 * i as u32,
            success: i > 2,
            entropy: 1.2,
        })
        .collect();
    let m = TrainMetrics { rows };
    write_metrics(&path, &m).unwrap();
    let text = std::fs::read_to_string(&path).unwrap();
    assert_eq!(text.lines().next().unwrap(), METRICS_HEADER.join(","));
    assert_eq!(read_metrics(&path).unwrap(), m);

    let mut out = Vec::new();
    write_time_series(&mut out, &m, 5, 100.0).unwrap();
    let text = String::from_utf8(out).unwrap();
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines.len(), 7);
    // Trailing mean over episodes 2..=6: ticks 2800..2400 → 26 s.
    let trailing: f64 = lines[6].split(',').nth(2).unwrap().parse().unwrap();
    assert!((trailing - 26.0).abs() < 1e-9, "{trailing}");
}

#[test]
fn replay_has_fifteen_columns() {
    let f = demo(2);
    let mut out = Vec::new();
    replay_episode(&mut out, &f.episode).unwrap();
    let text = String::from_utf8(out).unwrap();
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines[0], REPLAY_COLUMNS.join(","));
    assert_eq!(lines.len(), f.episode.len() + 1);
    assert!(lines.iter().all(|l| l.split(',').count() == 15));

    let rec = encode_discrete(&f.episode, &TrainConfig::default().sim.actions, 100.0);
    let mut out = Vec::new();
    replay_teleop(&mut out, &rec).unwrap();
    assert_eq!(String::from_utf8(out).unwrap().lines().count(), rec.ticks.len() + 1);

    let mut out = Vec::new();
    replay_episode(&mut out, &Episode::new(0)).unwrap();
    assert_eq!(String::from_utf8(out).unwrap().lines().count(), 1);
}

#[test]
fn demo_directory_listing() {
    let dir = tempdir().unwrap();
    assert!(matches!(demo_files(dir.path()), Err(Error::DatasetNotFound(_))));
    assert!(matches!(
        demo_files(&dir.path().join("nope")),
        Err(Error::DatasetNotFound(_))
    ));
    save_episode(&demo(1), &dir.path().join("b.pgep")).unwrap();
    save_episode(&demo(2), &dir.path().join("a.pgep")).unwrap();
    std::fs::write(dir.path().join("notes.txt"), "x").unwrap();
    let files = demo_files(dir.path()).unwrap();
    let names: Vec<_> = files.iter().map(|p| p.file_name().unwrap().to_str().unwrap()).collect();
    assert_eq!(names, ["a.pgep", "b.pgep"]);
    let (ds, _) = load_dataset(&files, &Thresholds::default()).unwrap();
    assert_eq!(ds.episodes.len(), 2);
}
