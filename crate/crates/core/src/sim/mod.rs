//! Quasi-static peg-in-hole environment.
//!
//! The peg is a cylinder whose pose is tracked at the center of its tip
//! disc (mm) with roll/pitch/yaw in degrees. A compliant controller moves
//! it in response to the sum of the commanded target wrench, a spring toward
//! the reference pose fixed at reset, and penalty contact forces from the
//! hole (see [`contact`]). Motion is first order: velocity is the net drive
//! divided by the damping, integrated in substeps within every tick.

mod contact;

pub use contact::{contact_detail, contact_wrench, ContactDetail};

use crate::math;
use crate::{Error, Result, SimRng};
use rand::Rng;
use rand_distr::{Distribution, Normal};

/// Pose of the peg tip: `[x, y, z]` in mm, `[rx, ry, rz]` in degrees.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct Pose(pub [f64; 6]);

impl Pose {
    pub fn position(&self) -> [f64; 3] {
        [self.0[0], self.0[1], self.0[2]]
    }

    pub fn rotation_deg(&self) -> [f64; 3] {
        [self.0[3], self.0[4], self.0[5]]
    }

    /// Unit vector along the peg axis, pointing from the tip toward the
    /// gripper. Yaw does not change it.
    pub fn axis(&self) -> [f64; 3] {
        let rx = math::to_rad(self.0[3]);
        let ry = math::to_rad(self.0[4]);
        [
            math::sin(ry),
            -math::sin(rx) * math::cos(ry),
            math::cos(rx) * math::cos(ry),
        ]
    }

    pub fn is_finite(&self) -> bool {
        self.0.iter().all(|v| v.is_finite())
    }
}

/// Linear (mm/s) and angular (deg/s) velocity.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct Twist(pub [f64; 6]);

/// Force in N and moment in N·mm.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct Wrench {
    pub force: [f64; 3],
    pub moment: [f64; 3],
}

impl Wrench {
    pub const ZERO: Wrench = Wrench {
        force: [0.0; 3],
        moment: [0.0; 3],
    };

    pub fn from_array(a: [f64; 6]) -> Self {
        Wrench {
            force: [a[0], a[1], a[2]],
            moment: [a[3], a[4], a[5]],
        }
    }

    pub fn to_array(&self) -> [f64; 6] {
        [
            self.force[0],
            self.force[1],
            self.force[2],
            self.moment[0],
            self.moment[1],
            self.moment[2],
        ]
    }

    pub fn add(&self, other: &Wrench) -> Wrench {
        let mut out = *self;
        for i in 0..3 {
            out.force[i] += other.force[i];
            out.moment[i] += other.moment[i];
        }
        out
    }

    pub fn is_finite(&self) -> bool {
        self.to_array().iter().all(|v| v.is_finite())
    }
}

/// Cylindrical hole with a 45° entry chamfer.
#[derive(Clone, Copy, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(default))]
pub struct HoleGeom {
    /// mm
    pub hole_radius: f64,
    /// Radial gap between peg and bore, mm. The peg radius is
    /// `hole_radius - clearance`.
    pub clearance: f64,
    /// mm; reaching it ends the episode successfully.
    pub hole_depth: f64,
    /// Penalty stiffness, N/mm.
    pub wall_stiffness: f64,
    pub friction_coeff: f64,
    /// Width (and height) of the entry chamfer, mm. The bore begins at
    /// z = 0 and the surrounding surface sits at z = chamfer.
    pub chamfer: f64,
}

impl Default for HoleGeom {
    fn default() -> Self {
        HoleGeom {
            hole_radius: 10.0,
            clearance: 0.05,
            hole_depth: 20.0,
            wall_stiffness: 1000.0,
            friction_coeff: 0.3,
            chamfer: 1.5,
        }
    }
}

impl HoleGeom {
    pub fn peg_radius(&self) -> f64 {
        self.hole_radius - self.clearance
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: &str| Err(Error::InvalidGeometry(msg.into()));
        if !(self.clearance > 0.0 && self.clearance < self.hole_radius) {
            return bad("clearance must lie in (0, hole_radius)");
        }
        if !(self.hole_depth > 0.0) {
            return bad("hole_depth must be positive");
        }
        if !(self.wall_stiffness > 0.0) {
            return bad("wall_stiffness must be positive");
        }
        if !(self.friction_coeff >= 0.0) {
            return bad("friction_coeff must be non-negative");
        }
        if !(self.chamfer >= 0.0) {
            return bad("chamfer must be non-negative");
        }
        Ok(())
    }
}

/// Magnitudes used to turn discrete actions into target wrenches.
#[derive(Clone, Copy, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(default))]
pub struct WiggleParams {
    /// Downward force magnitude, N.
    pub down_force: f64,
    /// Half-width of the uniform wiggle moments, N·mm.
    pub wiggle_amplitude: f64,
}

impl Default for WiggleParams {
    fn default() -> Self {
        WiggleParams {
            down_force: 10.0,
            wiggle_amplitude: 100.0,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(default))]
pub struct SimConfig {
    pub tick_hz: f64,
    /// N/mm for x, y, z; N·mm/deg for rx, ry, rz.
    pub impedance_stiffness: [f64; 6],
    /// N·s/mm for x, y, z; N·mm·s/deg for rx, ry, rz.
    pub impedance_damping: [f64; 6],
    /// Per-axis cap on the controller force, N.
    pub force_limit: f64,
    pub max_ticks: u32,
    /// Half-width of the uniform lateral start offset, mm.
    pub start_offset_range: f64,
    /// Half-width of the uniform roll/pitch start tilt, degrees.
    pub start_tilt_range: f64,
    /// Height of the tip above the chamfer top at reset, mm.
    pub start_gap: f64,
    pub gravity_compensated: bool,
    /// Weight of the peg, N; only applied when not gravity compensated.
    pub peg_weight: f64,
    /// Standard deviation of sensed force noise, N.
    pub sensor_noise_force: f64,
    /// Standard deviation of sensed moment noise, N·mm.
    pub sensor_noise_moment: f64,
    /// Integration substeps per tick.
    pub substeps: u32,
    /// Per-tick depth gain below which the peg counts as stuck, mm.
    pub progress_eps: f64,
    pub actions: WiggleParams,
}

impl Default for SimConfig {
    fn default() -> Self {
        SimConfig {
            tick_hz: 100.0,
            impedance_stiffness: [0.3, 0.3, 0.3, 20.0, 20.0, 20.0],
            impedance_damping: [1.5, 1.5, 1.5, 20.0, 20.0, 20.0],
            force_limit: 20.0,
            max_ticks: 3000,
            start_offset_range: 1.0,
            start_tilt_range: 2.0,
            start_gap: 0.1,
            gravity_compensated: true,
            peg_weight: 2.0,
            sensor_noise_force: 0.05,
            sensor_noise_moment: 0.5,
            substeps: 20,
            progress_eps: 0.01,
            actions: WiggleParams::default(),
        }
    }
}

impl SimConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |msg: &str| Err(Error::InvalidConfig(msg.into()));
        if !(self.tick_hz > 0.0) {
            return bad("tick_hz must be positive");
        }
        if self.max_ticks == 0 {
            return bad("max_ticks must be positive");
        }
        if self.substeps == 0 {
            return bad("substeps must be positive");
        }
        if !self.impedance_stiffness.iter().all(|&k| k > 0.0) {
            return bad("impedance stiffness must be positive");
        }
        if !self.impedance_damping.iter().all(|&d| d > 0.0) {
            return bad("impedance damping must be positive");
        }
        if !(self.force_limit > 0.0) {
            return bad("force_limit must be positive");
        }
        if !(self.start_offset_range >= 0.0 && self.start_tilt_range >= 0.0) {
            return bad("start ranges must be non-negative");
        }
        if !(self.sensor_noise_force >= 0.0 && self.sensor_noise_moment >= 0.0) {
            return bad("sensor noise must be non-negative");
        }
        if !(self.actions.down_force >= 0.0 && self.actions.wiggle_amplitude >= 0.0) {
            return bad("action magnitudes must be non-negative");
        }
        Ok(())
    }

    pub fn dt(&self) -> f64 {
        1.0 / self.tick_hz
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub enum EpisodeStatus {
    Running,
    Success { ticks: u32 },
    Timeout,
}

impl EpisodeStatus {
    pub fn is_terminal(&self) -> bool {
        !matches!(self, EpisodeStatus::Running)
    }

    pub fn label(&self) -> &'static str {
        match self {
            EpisodeStatus::Running => "running",
            EpisodeStatus::Success { .. } => "success",
            EpisodeStatus::Timeout => "timeout",
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct PegState {
    pub pose: Pose,
    pub twist: Twist,
    /// Insertion progress below the bore entry, mm.
    pub depth: f64,
    pub in_contact: bool,
    pub contact_points: u8,
    /// Anchor of the controller springs, fixed at reset.
    pub reference: Pose,
    pub tick: u32,
    pub status: EpisodeStatus,
}

/// The four discrete commands of the generator.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[repr(u8)]
pub enum Action {
    DownWiggle = 0,
    Down = 1,
    Wiggle = 2,
    Idle = 3,
}

pub const ACTION_COUNT: usize = 4;

impl Action {
    pub const ALL: [Action; ACTION_COUNT] =
        [Action::DownWiggle, Action::Down, Action::Wiggle, Action::Idle];

    pub fn from_code(code: u8) -> Result<Action> {
        Action::ALL
            .get(code as usize)
            .copied()
            .ok_or(Error::InvalidAction(code))
    }

    pub fn code(self) -> u8 {
        self as u8
    }

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn from_bits(down: bool, wiggle: bool) -> Action {
        match (down, wiggle) {
            (true, true) => Action::DownWiggle,
            (true, false) => Action::Down,
            (false, true) => Action::Wiggle,
            (false, false) => Action::Idle,
        }
    }

    pub fn has_down(self) -> bool {
        matches!(self, Action::DownWiggle | Action::Down)
    }

    pub fn has_wiggle(self) -> bool {
        matches!(self, Action::DownWiggle | Action::Wiggle)
    }

    pub fn one_hot(self) -> [f64; ACTION_COUNT] {
        let mut v = [0.0; ACTION_COUNT];
        v[self.index()] = 1.0;
        v
    }
}

/// Places the peg just above the hole with a seeded lateral offset and tilt.
pub fn reset(config: &SimConfig, geom: &HoleGeom, seed: u64) -> Result<PegState> {
    config.validate()?;
    geom.validate()?;
    if config.start_offset_range > geom.hole_radius {
        return Err(Error::StartOffsetTooLarge {
            offset: config.start_offset_range,
            radius: geom.hole_radius,
        });
    }
    let mut rng = crate::rng_from_seed(seed);
    let mut draw = |range: f64| {
        if range > 0.0 {
            rng.random_range(-range..=range)
        } else {
            0.0
        }
    };
    let x = draw(config.start_offset_range);
    let y = draw(config.start_offset_range);
    let rx = draw(config.start_tilt_range);
    let ry = draw(config.start_tilt_range);
    let pose = Pose([x, y, geom.chamfer + config.start_gap, rx, ry, 0.0]);
    let (_, points) = contact_wrench(&pose, geom);
    Ok(PegState {
        pose,
        twist: Twist::default(),
        depth: 0.0,
        in_contact: points > 0,
        contact_points: points,
        reference: pose,
        tick: 0,
        status: EpisodeStatus::Running,
    })
}

/// Maps a discrete action to the target wrench for one tick.
pub fn decode_action(action: Action, amp: &WiggleParams, rng: &mut SimRng) -> Wrench {
    let mut w = Wrench::ZERO;
    if action.has_down() {
        w.force[2] = -amp.down_force;
    }
    if action.has_wiggle() && amp.wiggle_amplitude > 0.0 {
        let a = amp.wiggle_amplitude;
        for m in w.moment.iter_mut() {
            *m = rng.random_range(-a..=a);
        }
    }
    w
}

/// Same as [`decode_action`] for a raw action code.
pub fn decode_action_code(code: u8, amp: &WiggleParams, rng: &mut SimRng) -> Result<Wrench> {
    Ok(decode_action(Action::from_code(code)?, amp, rng))
}

pub fn check_termination(
    state: &PegState,
    tick: u32,
    config: &SimConfig,
    geom: &HoleGeom,
) -> EpisodeStatus {
    if state.depth >= geom.hole_depth {
        EpisodeStatus::Success { ticks: tick }
    } else if tick >= config.max_ticks {
        EpisodeStatus::Timeout
    } else {
        EpisodeStatus::Running
    }
}

/// Result of one tick.
#[derive(Clone, Debug, PartialEq)]
pub struct StepOutcome {
    pub state: PegState,
    /// Contact wrench plus sensor noise.
    pub sensed: Wrench,
    pub status: EpisodeStatus,
    /// Largest |force component| the controller applied during the tick.
    pub applied_force_peak: f64,
    /// Largest bore-wall penetration beyond the clearance seen during the tick, mm.
    pub wall_penetration_peak: f64,
}

fn coulomb(drive: f64, cap: f64) -> f64 {
    if drive > cap {
        drive - cap
    } else if drive < -cap {
        drive + cap
    } else {
        0.0
    }
}

/// Advances the simulation by one tick under the given target wrench.
pub fn step(
    state: &PegState,
    target: &Wrench,
    config: &SimConfig,
    geom: &HoleGeom,
    rng: &mut SimRng,
) -> Result<StepOutcome> {
    if state.status.is_terminal() {
        return Err(Error::EpisodeFinished);
    }
    let dt = config.dt();
    let h = dt / config.substeps as f64;
    let k = &config.impedance_stiffness;
    let d = &config.impedance_damping;
    let mu = geom.friction_coeff;
    let r_peg = geom.peg_radius();
    let reference = state.reference.0;
    let start = state.pose.0;
    let mut pose = state.pose.0;
    let mut force_peak: f64 = 0.0;
    let mut pen_peak: f64 = 0.0;

    for _ in 0..config.substeps {
        let c = contact_detail(&Pose(pose), geom);
        pen_peak = pen_peak.max(c.wall_penetration);
        let mut applied = [0.0; 3];
        for i in 0..3 {
            let mut f = target.force[i] + k[i] * (reference[i] - pose[i]);
            if i == 2 && !config.gravity_compensated {
                f -= config.peg_weight;
            }
            applied[i] = f.clamp(-config.force_limit, config.force_limit);
            force_peak = force_peak.max(applied[i].abs());
        }
        let mut drive = [0.0; 6];
        for i in 0..3 {
            drive[i] = applied[i] + c.wrench.force[i];
            drive[3 + i] = target.moment[i]
                + k[3 + i] * (reference[3 + i] - pose[3 + i])
                + c.wrench.moment[i];
        }
        // Friction from the bore walls resists axial sliding and rotation.
        let cap_axial = mu * c.bore_normal;
        drive[2] = coulomb(drive[2], cap_axial);
        let cap_rot = cap_axial * r_peg;
        let tilt = math::sqrt(drive[3] * drive[3] + drive[4] * drive[4]);
        let scale = if tilt > cap_rot { (tilt - cap_rot) / tilt } else { 0.0 };
        drive[3] *= scale;
        drive[4] *= scale;
        drive[5] = coulomb(drive[5], cap_rot);
        for i in 0..6 {
            pose[i] += drive[i] / d[i] * h;
        }
        if pose[2] < -geom.hole_depth {
            pose[2] = -geom.hole_depth;
        }
    }

    let tick = state.tick + 1;
    let new_pose = Pose(pose);
    if !new_pose.is_finite() {
        return Err(Error::NonFinite { tick });
    }
    let mut twist = [0.0; 6];
    for i in 0..6 {
        twist[i] = (pose[i] - start[i]) / dt;
    }
    let c = contact_detail(&new_pose, geom);
    let mut sensed = c.wrench;
    if config.sensor_noise_force > 0.0 {
        let n = Normal::new(0.0, config.sensor_noise_force).expect("finite sigma");
        for f in sensed.force.iter_mut() {
            *f += n.sample(rng);
        }
    }
    if config.sensor_noise_moment > 0.0 {
        let n = Normal::new(0.0, config.sensor_noise_moment).expect("finite sigma");
        for m in sensed.moment.iter_mut() {
            *m += n.sample(rng);
        }
    }
    if !sensed.is_finite() {
        return Err(Error::NonFinite { tick });
    }
    let depth = (-pose[2]).clamp(0.0, geom.hole_depth);
    let mut next = PegState {
        pose: new_pose,
        twist: Twist(twist),
        depth,
        in_contact: c.points > 0,
        contact_points: c.points,
        reference: state.reference,
        tick,
        status: EpisodeStatus::Running,
    };
    let status = check_termination(&next, tick, config, geom);
    next.status = status;
    Ok(StepOutcome {
        state: next,
        sensed,
        status,
        applied_force_peak: force_peak,
        wall_penetration_peak: pen_peak,
    })
}

/// A seeded episode: owns the peg state and the noise stream.
#[derive(Clone, Debug)]
pub struct Env {
    pub config: SimConfig,
    pub geom: HoleGeom,
    pub state: PegState,
    pub seed: u64,
    rng: SimRng,
}

impl Env {
    pub fn new(config: SimConfig, geom: HoleGeom, seed: u64) -> Result<Env> {
        let state = reset(&config, &geom, seed)?;
        Ok(Env {
            config,
            geom,
            state,
            seed,
            // Separate stream from the one used for the start pose.
            rng: crate::rng_from_seed(seed ^ 0x9E37_79B9_7F4A_7C15),
        })
    }

    /// The sensor reading at reset, before any tick.
    pub fn initial_sensed(&self) -> Wrench {
        contact_wrench(&self.state.pose, &self.geom).0
    }

    pub fn rng(&mut self) -> &mut SimRng {
        &mut self.rng
    }

    /// Decodes `action` and advances one tick.
    pub fn step_action(&mut self, action: Action) -> Result<(StepOutcome, Wrench)> {
        let target = decode_action(action, &self.config.actions, &mut self.rng);
        let out = self.step_wrench(&target)?;
        Ok((out, target))
    }

    pub fn step_wrench(&mut self, target: &Wrench) -> Result<StepOutcome> {
        let out = step(&self.state, target, &self.config, &self.geom, &mut self.rng)?;
        self.state = out.state.clone();
        Ok(out)
    }
}
