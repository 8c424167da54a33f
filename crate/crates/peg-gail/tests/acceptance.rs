//! Acceptance suite. Prints one PASS/FAIL line per criterion and exits
//! nonzero if any fails.

use peg_gail::cli::scripted_demos;
use peg_gail_core::demos::{build_expert_dataset, scripted_demo};
use peg_gail_core::discriminator::Discriminator;
use peg_gail_core::nn::{grad_check, layer_norm_time, Network, ParamSet};
use peg_gail_core::policy::{entropy, ActMode, Generator, ObservationWindow, CHANNELS};
use peg_gail_core::ppo::{compute_advantages, ValueNet};
use peg_gail_core::sim::{Action, EpisodeStatus, Env, HoleGeom, SimConfig, ACTION_COUNT};
use peg_gail_core::trainer::{evaluate, insertion_time_series, TrainConfig, TrainEvent, TrainMetrics, Trainer};
use peg_gail_core::{rng_from_seed, SimRng};
use rand::Rng;
use std::process::ExitCode;
use std::time::Instant;

const SEEDS: [u64; 5] = [0, 1, 2, 3, 4];
const DEMOS: usize = 8;
const EVAL_EPISODES: usize = 50;

struct Report {
    failed: usize,
}

impl Report {
    fn line(&mut self, ok: bool, name: &str, detail: String) {
        if !ok {
            self.failed += 1;
        }
        println!("[{}] {name}: {detail}", if ok { "PASS" } else { "FAIL" });
    }

    fn info(&self, name: &str, detail: String) {
        println!("[INFO] {name}: {detail}");
    }
}

#[derive(Debug, PartialEq)]
enum Seen {
    Collected,
    Ppo,
    Disc { expert: usize, generated: usize },
    Done,
}

struct Run {
    seed: u64,
    cfg: TrainConfig,
    demos: usize,
    metrics: TrainMetrics,
    fresh: ParamSet,
    trained: ParamSet,
    log: Vec<(usize, Seen)>,
    secs: f64,
}

fn train(seed: u64) -> Run {
    let cfg = TrainConfig {
        seed,
        ..TrainConfig::default()
    };
    let sources = scripted_demos(&cfg, DEMOS, seed)
        .unwrap()
        .into_iter()
        .enumerate()
        .map(|(i, ep)| (format!("demo_{i:03}"), ep))
        .collect();
    let (ds, _) = build_expert_dataset(sources).unwrap();
    let start = Instant::now();
    let mut trainer = Trainer::new(cfg.clone(), &ds).unwrap();
    let fresh = trainer.state().policy.clone();
    let mut log = Vec::new();
    let mut observer = |e: &TrainEvent<'_>| {
        log.push(match e {
            TrainEvent::Collected { episode, .. } => (*episode, Seen::Collected),
            TrainEvent::PpoUpdate { episode, .. } => (*episode, Seen::Ppo),
            TrainEvent::DiscRound {
                episode,
                expert,
                generated,
                ..
            } => (
                *episode,
                Seen::Disc {
                    expert: *expert,
                    generated: *generated,
                },
            ),
            TrainEvent::EpisodeDone { metrics, .. } => (metrics.episode, Seen::Done),
        });
        Ok(())
    };
    let metrics = trainer.run(&mut observer).unwrap();
    Run {
        seed,
        demos: ds.episodes.len(),
        metrics,
        fresh,
        trained: trainer.into_state().policy,
        log,
        secs: start.elapsed().as_secs_f64(),
        cfg,
    }
}

fn curve_ratio(run: &Run) -> f64 {
    let s = insertion_time_series(&run.metrics.insertion_ticks(), 5, run.cfg.sim.tick_hz);
    s[s.len() - 1] / s[0]
}

fn learning_curve(r: &mut Report, runs: &[Run]) {
    let ratios: Vec<f64> = runs.iter().map(curve_ratio).collect();
    let improved = ratios.iter().filter(|&&x| x <= 0.75).count();
    let detail = runs
        .iter()
        .zip(&ratios)
        .map(|(run, x)| format!("seed {} {:.2} ({:.0}s)", run.seed, x, run.secs))
        .collect::<Vec<_>>()
        .join(", ");
    let within_budget = runs.iter().all(|run| run.secs < 600.0);
    r.line(
        improved >= 4 && within_budget,
        "learning curve",
        format!("late/early trailing-5 mean ratio ≤ 0.75 in {improved}/5 seeds [{detail}]"),
    );
    let exact = runs
        .iter()
        .all(|run| run.demos == DEMOS && run.metrics.rows.len() == 20 && run.cfg.n_episodes == 20);
    r.line(
        exact && improved >= 4,
        "sample efficiency",
        format!("{DEMOS} demonstrations and 20 episodes per seed, learning curve holds: {}", improved >= 4),
    );
}

fn random_window(window: usize, rng: &mut SimRng) -> ObservationWindow {
    let action_at = CHANNELS - ACTION_COUNT;
    let mut data = vec![0.0; window * CHANNELS];
    for t in 0..window {
        for c in 0..action_at {
            data[t * CHANNELS + c] = rng.random_range(-2.0..2.0);
        }
        data[t * CHANNELS + action_at + rng.random_range(0..ACTION_COUNT)] = 1.0;
    }
    ObservationWindow { window, data }
}

fn trained_vs_untrained(r: &mut Report, runs: &[Run]) {
    let cfg = &runs[0].cfg;
    let gen = Generator::new(cfg.arch).unwrap();
    let mut rng = rng_from_seed(77);
    let h: f64 = (0..100)
        .map(|_| entropy(&gen.probs(&runs[0].fresh, &random_window(cfg.arch.window, &mut rng)).unwrap()))
        .sum::<f64>()
        / 100.0;
    r.line(h >= 1.2, "fresh policy entropy", format!("mean {h:.3} nats over 100 random windows"));

    let late: Vec<(u64, f64)> = runs
        .iter()
        .map(|run| {
            let ok: Vec<f64> = run.metrics.rows[10..].iter().filter(|m| m.success).map(|m| m.entropy).collect();
            (run.seed, ok.iter().sum::<f64>() / ok.len().max(1) as f64)
        })
        .collect();
    r.line(
        late.iter().all(|&(_, e)| e > 0.0 && e < h),
        "entropy drops with training",
        format!(
            "mean entropy of successful episodes 11-20 below fresh {h:.3} [{}]",
            late.iter().map(|(s, e)| format!("seed {s} {e:.3}")).collect::<Vec<_>>().join(", ")
        ),
    );

    let rates: Vec<(u64, f64, f64)> = runs
        .iter()
        .map(|run| {
            let eval = |p: &ParamSet| {
                evaluate(&gen, p, &run.cfg.sim, &run.cfg.geom, EVAL_EPISODES, run.seed, ActMode::Argmax)
                    .unwrap()
                    .success_rate()
            };
            (run.seed, eval(&run.fresh), eval(&run.trained))
        })
        .collect();
    let (_, fresh, trained) = rates[0];
    r.line(
        trained >= 0.9 && fresh <= 0.3,
        "trained vs untrained",
        format!("default seed, {EVAL_EPISODES} argmax episodes: trained {trained:.2} (≥ 0.90), fresh {fresh:.2} (≤ 0.30)"),
    );
    r.info(
        "trained vs untrained per seed",
        rates
            .iter()
            .map(|(s, f, t)| format!("seed {s} trained {t:.2} fresh {f:.2}"))
            .collect::<Vec<_>>()
            .join(", "),
    );
}

fn disc_trend(r: &mut Report, runs: &[Run]) {
    let mut ok = 0;
    let mut detail = Vec::new();
    for run in runs {
        let losses: Vec<f64> = run.metrics.rows.iter().map(|m| m.disc_loss).collect();
        let first = losses[0];
        let late = &losses[10..20];
        let hi = late.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let lo = late.iter().cloned().fold(f64::INFINITY, f64::min);
        let returns = late.iter().any(|l| (l - first).abs() <= 0.05);
        let pass = late.iter().all(|l| l.is_finite()) && hi - lo <= 0.3 && !returns;
        ok += pass as usize;
        detail.push(format!(
            "seed {} ep1 {:.3} late [{:.3}, {:.3}]{}",
            run.seed,
            first,
            lo,
            hi,
            if pass { "" } else { " x" }
        ));
    }
    r.line(
        ok == runs.len(),
        "discriminator trend",
        format!("episodes 11-20 range ≤ 0.3 and away from episode 1 by > 0.05 in {ok}/{} seeds [{}]", runs.len(), detail.join(", ")),
    );
}

fn alternation(r: &mut Report, runs: &[Run]) {
    let mut rounds = 0;
    let mut bad = Vec::new();
    for run in runs {
        for ep in 1..=run.cfg.n_episodes {
            let seen: Vec<&Seen> = run.log.iter().filter(|(e, _)| *e == ep).map(|(_, s)| s).collect();
            let ppo = run.cfg.gen_updates_per_episode;
            let shape = seen.len() == ppo + 3
                && *seen[0] == Seen::Collected
                && seen[1..=ppo].iter().all(|s| **s == Seen::Ppo)
                && *seen[ppo + 2] == Seen::Done;
            let balanced = matches!(seen.get(ppo + 1), Some(Seen::Disc { expert, generated }) if expert == generated && *expert > 0);
            if shape && balanced {
                rounds += 1;
            } else {
                bad.push(format!("seed {} episode {ep}", run.seed));
            }
        }
        if !run.log.windows(2).all(|w| w[0].0 <= w[1].0) {
            bad.push(format!("seed {} out of order", run.seed));
        }
    }
    r.line(
        bad.is_empty(),
        "balanced batches and alternation",
        if bad.is_empty() {
            format!("{rounds} discriminator rounds with equal expert/generated counts, never interleaved with policy updates")
        } else {
            format!("violations: {}", bad.join(", "))
        },
    );
}

fn eq1_suite(r: &mut Report) {
    let zero = layer_norm_time(&[5.0, 5.0, 5.0], 1, 0.1) == vec![0.0; 3];
    let y = layer_norm_time(&[1.0, 2.0, 3.0], 1, 0.1);
    // Population std of [1, 2, 3] is sqrt(2/3).
    let s = 1.0 / (0.1 + (2.0f64 / 3.0).sqrt());
    let ramp = (y[0] + s).abs() < 1e-4 && y[1].abs() < 1e-4 && (y[2] - s).abs() < 1e-4;
    let ramp_rounded = (y[0] + 1.0911).abs() < 1e-4 && (y[2] - 1.0911).abs() < 1e-4;

    let mut rng = rng_from_seed(11);
    let mut worst: f64 = 0.0;
    for _ in 0..1000 {
        let t = rng.random_range(2..=20);
        let c = rng.random_range(1..=CHANNELS);
        let x: Vec<f64> = (0..t * c).map(|_| rng.random_range(-10.0..10.0)).collect();
        let k = rng.random_range(-100.0..100.0);
        let shifted: Vec<f64> = x.iter().map(|v| v + k).collect();
        let a = layer_norm_time(&x, c, 0.1);
        let b = layer_norm_time(&shifted, c, 0.1);
        for (p, q) in a.iter().zip(&b) {
            worst = worst.max((p - q).abs());
        }
    }
    let shift = worst <= 1e-9;
    r.line(
        zero && ramp && ramp_rounded && shift,
        "layer norm over time",
        format!(
            "constant channel → zeros: {zero}; [1,2,3] → [{:.4}, {:.4}, {:.4}]: {}; shift invariance max diff {worst:.1e} over 1000 windows",
            y[0],
            y[1],
            y[2],
            ramp && ramp_rounded
        ),
    );
}

fn check_net(net: &Network, init: impl Fn(u64) -> ParamSet, input: impl Fn(&mut SimRng) -> Vec<f64>) -> (f64, usize, usize) {
    let mut worst: f64 = 0.0;
    let (mut checked, mut skipped) = (0, 0);
    for point in 0..20u64 {
        let mut rng = rng_from_seed(1000 + point);
        let mut params = init(point);
        for v in params.values.iter_mut() {
            *v += rng.random_range(-0.05..0.05);
        }
        let x = input(&mut rng);
        let weights: Vec<f64> = (0..net.output_len()).map(|_| rng.random_range(-1.0..1.0)).collect();
        let g = grad_check(net, &params, &x, &weights, 1e-5, 1e-6).unwrap();
        worst = worst.max(g.max_rel_err);
        checked += g.checked;
        skipped += g.skipped;
    }
    (worst, checked, skipped)
}

fn gradient_oracle(r: &mut Report) {
    let arch = TrainConfig::default().arch;
    let start = Instant::now();
    let gen = Generator::new(arch).unwrap();
    let value = ValueNet::new(arch).unwrap();
    let disc = Discriminator::new(arch).unwrap();
    let window = |rng: &mut SimRng| random_window(arch.window, rng).data;
    let results = [
        ("generator", check_net(&gen.net, |s| gen.init_params(s), window)),
        ("value", check_net(&value.net, |s| value.init_params(s), window)),
        (
            "discriminator",
            check_net(&disc.net, |s| disc.init_params(s), |rng| {
                let mut x = random_window(arch.window, rng).data;
                let a = Action::from_code(rng.random_range(0..4)).unwrap();
                x.extend_from_slice(&a.one_hot());
                x
            }),
        ),
    ];
    let secs = start.elapsed().as_secs_f64();
    let ok = secs < 60.0 && results.iter().all(|(_, (e, c, _))| *e < 1e-4 && *c > 0);
    let detail = results
        .iter()
        .map(|(n, (e, c, s))| format!("{n} max rel err {e:.1e} ({c} coords, {s} ReLU kinks skipped)"))
        .collect::<Vec<_>>()
        .join(", ");
    r.line(ok, "gradient oracle", format!("20 points per network, h = 1e-5: {detail}; {secs:.1}s"));
}

fn gae_oracle(rw: &[f64], v: &[f64], d: &[bool], gamma: f64, lambda: f64) -> Vec<f64> {
    let n = rw.len();
    (0..n)
        .map(|t| {
            let mut sum = 0.0;
            let mut w = 1.0;
            for k in t..n {
                let next = if d[k] || k + 1 == n { 0.0 } else { v[k + 1] };
                sum += w * (rw[k] + gamma * next - v[k]);
                if d[k] {
                    break;
                }
                w *= gamma * lambda;
            }
            sum
        })
        .collect()
}

fn gae(r: &mut Report) {
    let mut rng = rng_from_seed(5);
    let mut worst: f64 = 0.0;
    for _ in 0..1000 {
        let n = rng.random_range(1..=50);
        let rw: Vec<f64> = (0..n).map(|_| rng.random_range(-1.0..1.0)).collect();
        let v: Vec<f64> = (0..n).map(|_| rng.random_range(-1.0..1.0)).collect();
        let d: Vec<bool> = (0..n).map(|i| i + 1 == n || rng.random_bool(0.05)).collect();
        let gamma = rng.random_range(0.9..1.0);
        let lambda = rng.random_range(0.0..1.0);
        let (adv, ret) = compute_advantages(&rw, &v, &d, gamma, lambda).unwrap();
        for (t, o) in gae_oracle(&rw, &v, &d, gamma, lambda).iter().enumerate() {
            worst = worst.max((adv[t] - o).abs()).max((ret[t] - (o + v[t])).abs());
        }
    }
    r.line(worst <= 1e-12, "GAE oracle", format!("max |diff| {worst:.1e} over 1000 episodes of length ≤ 50"));
}

fn run_to_end(env: &mut Env, mut policy: impl FnMut(&mut SimRng) -> Action) -> Vec<(f64, f64, f64)> {
    let mut trace = Vec::new();
    let mut rng = rng_from_seed(env.state.depth.to_bits());
    while !env.state.status.is_terminal() {
        let a = policy(&mut rng);
        let (o, _) = env.step_action(a).unwrap();
        trace.push((o.applied_force_peak, o.wall_penetration_peak, o.state.depth));
    }
    trace
}

fn find_jam(seed: u64, hold: u32) -> Option<Env> {
    let mut env = Env::new(SimConfig::default(), HoleGeom::default(), seed).unwrap();
    let mut stuck = 0;
    while !env.state.status.is_terminal() {
        let before = env.state.depth;
        let (o, _) = env.step_action(Action::Down).unwrap();
        if o.state.contact_points == 2 && o.state.depth - before < env.config.progress_eps {
            stuck += 1;
        } else {
            stuck = 0;
        }
        if stuck >= hold {
            return Some(env);
        }
    }
    None
}

fn simulator(r: &mut Report) {
    let cfg = SimConfig::default();
    let geom = HoleGeom::default();
    let mut deterministic = true;
    let mut bounded = true;
    let mut contained = true;
    let mut worst_force: f64 = 0.0;
    let mut worst_pen: f64 = 0.0;
    let pen_bound = cfg.force_limit / geom.wall_stiffness;
    for seed in 0..100 {
        let run = || {
            let mut env = Env::new(cfg.clone(), geom, seed).unwrap();
            let mut rng = rng_from_seed(seed + 500);
            let mut states = Vec::new();
            for _ in 0..600 {
                if env.state.status.is_terminal() {
                    break;
                }
                let a = Action::from_code(rng.random_range(0..4)).unwrap();
                let (o, sensed) = env.step_action(a).unwrap();
                states.push((o, sensed));
            }
            states
        };
        let a = run();
        deterministic &= a == run();
        for (o, _) in &a {
            worst_force = worst_force.max(o.applied_force_peak);
            worst_pen = worst_pen.max(o.wall_penetration_peak);
            bounded &= o.applied_force_peak <= cfg.force_limit;
            contained &= o.state.depth <= geom.hole_depth && o.wall_penetration_peak <= pen_bound;
        }
    }

    let mut jams = 0;
    let mut escaped = 0;
    for seed in 0..100 {
        let Some(mut env) = find_jam(seed, 20) else { continue };
        jams += 1;
        let trace = run_to_end(&mut env, |_| Action::DownWiggle);
        for (f, p, d) in trace {
            bounded &= f <= cfg.force_limit;
            contained &= d <= geom.hole_depth && p <= pen_bound;
        }
        escaped += matches!(env.state.status, EpisodeStatus::Success { .. }) as usize;
    }
    let escape_rate = escaped as f64 / jams.max(1) as f64;

    let arch = TrainConfig::default().arch;
    let expert = (0..100)
        .filter(|&seed| scripted_demo(&cfg, &geom, &arch, seed).unwrap().success())
        .count();

    r.line(deterministic, "simulator determinism", "100 seeds × 600 random actions replayed bit-identically".into());
    r.line(
        bounded,
        "simulator force bound",
        format!("peak applied force {worst_force:.2} ≤ {:.2}", cfg.force_limit),
    );
    r.line(
        contained,
        "simulator containment",
        format!("depth ≤ {:.1} mm, peak wall penetration {worst_pen:.4} ≤ {pen_bound:.4} mm", geom.hole_depth),
    );
    r.line(
        jams >= 20 && escape_rate >= 0.9,
        "jam escape",
        format!("{escaped}/{jams} jammed resets escape with down+wiggle ({escape_rate:.2} ≥ 0.90)"),
    );
    r.line(expert >= 95, "scripted expert", format!("{expert}/100 resets succeed (≥ 95)"));
}

fn main() -> ExitCode {
    let mut r = Report { failed: 0 };
    eq1_suite(&mut r);
    gradient_oracle(&mut r);
    gae(&mut r);
    simulator(&mut r);
    let runs: Vec<Run> = SEEDS.iter().map(|&s| train(s)).collect();
    learning_curve(&mut r, &runs);
    trained_vs_untrained(&mut r, &runs);
    disc_trend(&mut r, &runs);
    alternation(&mut r, &runs);
    println!("acceptance: {} failed", r.failed);
    if r.failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
