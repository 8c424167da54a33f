//! Penalty contact between the cylindrical peg and the chamfered hole.
//!
//! Up to two contacts are tracked: the tip disc against the bore wall (or
//! the chamfer and surrounding surface while the tip is above the bore), and
//! the hole rim against the side of the peg once the tip is inside the bore.
//! Tip and rim pressing on opposite walls is the jamming configuration.

use super::{HoleGeom, Pose, Wrench};
use crate::math::{cross3, dot3, sqrt};

const TINY: f64 = 1e-12;

#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct ContactDetail {
    /// Wrench on the peg, moments about the tip center.
    pub wrench: Wrench,
    pub points: u8,
    /// Sum of bore-wall normal forces, N; the base of the friction caps.
    pub bore_normal: f64,
    /// Largest penetration into a bore wall, mm.
    pub wall_penetration: f64,
    pub tip_normal: f64,
    pub rim_normal: f64,
    /// Part of `tip_normal` carried by the bore wall.
    pub bore_tip_normal: f64,
}

/// Contact wrench on the peg and the number of active contact points.
pub fn contact_wrench(pose: &Pose, geom: &HoleGeom) -> (Wrench, u8) {
    let c = contact_detail(pose, geom);
    (c.wrench, c.points)
}

fn horizontal_dir(v: [f64; 3], fallback: [f64; 3]) -> ([f64; 3], f64) {
    let n = sqrt(v[0] * v[0] + v[1] * v[1]);
    if n > TINY {
        ([v[0] / n, v[1] / n, 0.0], n)
    } else {
        let f = sqrt(fallback[0] * fallback[0] + fallback[1] * fallback[1]);
        if f > TINY {
            ([fallback[0] / f, fallback[1] / f, 0.0], 0.0)
        } else {
            ([1.0, 0.0, 0.0], 0.0)
        }
    }
}

/// Point of the tip disc rim farthest along the horizontal direction `dir`.
fn disc_extreme(tip: [f64; 3], axis: [f64; 3], dir: [f64; 3], radius: f64) -> [f64; 3] {
    let along = dot3(dir, axis);
    let mut w = [
        dir[0] - along * axis[0],
        dir[1] - along * axis[1],
        dir[2] - along * axis[2],
    ];
    let n = sqrt(dot3(w, w));
    if n > TINY {
        for c in w.iter_mut() {
            *c /= n;
        }
    }
    [
        tip[0] + radius * w[0],
        tip[1] + radius * w[1],
        tip[2] + radius * w[2],
    ]
}

fn accumulate(out: &mut Wrench, tip: [f64; 3], at: [f64; 3], force: [f64; 3]) {
    let lever = [at[0] - tip[0], at[1] - tip[1], at[2] - tip[2]];
    let m = cross3(lever, force);
    for i in 0..3 {
        out.force[i] += force[i];
        out.moment[i] += m[i];
    }
}

/// One penalty contact before it is added to the wrench.
#[derive(Clone, Copy, Debug)]
struct Contact {
    at: [f64; 3],
    force: [f64; 3],
    normal: f64,
    /// Penetration into a bore wall, or zero for other surfaces.
    wall_pen: f64,
}

pub fn contact_detail(pose: &Pose, geom: &HoleGeom) -> ContactDetail {
    let tip = pose.position();
    let axis = pose.axis();
    let mut out = ContactDetail::default();
    let mut tip_c = tip_contact(tip, axis, geom);
    let mut rim_c = rim_contact(tip, axis, geom);

    // Tip and rim pressing on the same wall are one line contact; keep the
    // deeper end.
    if let (Some(t), Some(r)) = (tip_c, rim_c) {
        let same_side = t.wall_pen > 0.0
            && r.wall_pen > 0.0
            && t.force[0] * r.force[0] + t.force[1] * r.force[1] > 0.0;
        if same_side {
            if t.wall_pen >= r.wall_pen {
                rim_c = None;
            } else {
                tip_c = None;
            }
        }
    }
    if let Some(c) = tip_c {
        accumulate(&mut out.wrench, tip, c.at, c.force);
        out.points += 1;
        out.tip_normal = c.normal;
        if c.wall_pen > 0.0 {
            out.bore_tip_normal = c.normal;
        }
        out.wall_penetration = out.wall_penetration.max(c.wall_pen);
    }
    if let Some(c) = rim_c {
        accumulate(&mut out.wrench, tip, c.at, c.force);
        out.points += 1;
        if c.wall_pen > 0.0 {
            out.rim_normal = c.normal;
        }
        out.wall_penetration = out.wall_penetration.max(c.wall_pen);
    }
    out.bore_normal = out.bore_tip_normal + out.rim_normal;
    out
}

/// Outward rim point of the tip disc against whichever surface it is
/// nearest to: bore wall, chamfer, or the surface around the hole.
fn tip_contact(tip: [f64; 3], axis: [f64; 3], geom: &HoleGeom) -> Option<Contact> {
    let r = geom.peg_radius();
    let (dir, _) = horizontal_dir(tip, axis);
    let q = disc_extreme(tip, axis, dir, r);
    let ring = sqrt(q[0] * q[0] + q[1] * q[1]) - geom.hole_radius;
    if ring <= 0.0 {
        return None;
    }
    let inv_sqrt2 = core::f64::consts::FRAC_1_SQRT_2;
    // (penetration, normal, is bore wall)
    let mut best: Option<(f64, [f64; 3], bool)> = None;
    let mut consider = |pen: f64, normal: [f64; 3], bore: bool| {
        if pen > 0.0 && best.is_none_or(|(p, _, _)| pen < p) {
            best = Some((pen, normal, bore));
        }
    };
    if ring < geom.chamfer {
        if q[2] < ring {
            consider(
                (ring - q[2]) * inv_sqrt2,
                [-dir[0] * inv_sqrt2, -dir[1] * inv_sqrt2, inv_sqrt2],
                false,
            );
        }
    } else if q[2] < geom.chamfer {
        consider(geom.chamfer - q[2], [0.0, 0.0, 1.0], false);
    }
    if q[2] < 0.0 {
        consider(ring, [-dir[0], -dir[1], 0.0], true);
    }
    best.map(|(pen, normal, bore)| {
        let n = geom.wall_stiffness * pen;
        Contact {
            at: q,
            force: normal.map(|c| c * n),
            normal: n,
            wall_pen: if bore { pen } else { 0.0 },
        }
    })
}

/// Hole rim (the circular edge at z = 0) against the peg body. The rim
/// point facing the peg's offset in the entry plane is tested against the
/// peg cylinder and pushed out through the nearer of the side wall and
/// the tip face.
fn rim_contact(tip: [f64; 3], axis: [f64; 3], geom: &HoleGeom) -> Option<Contact> {
    if axis[2] <= TINY {
        return None;
    }
    let s = -tip[2] / axis[2];
    let center = [tip[0] + s * axis[0], tip[1] + s * axis[1], 0.0];
    let (dir, _) = horizontal_dir(center, axis);
    let corner = [geom.hole_radius * dir[0], geom.hole_radius * dir[1], 0.0];
    let v = [corner[0] - tip[0], corner[1] - tip[1], corner[2] - tip[2]];
    let along = dot3(v, axis);
    if along <= 0.0 {
        return None;
    }
    let radial = [
        v[0] - along * axis[0],
        v[1] - along * axis[1],
        v[2] - along * axis[2],
    ];
    let rho = sqrt(dot3(radial, radial));
    let side_pen = geom.peg_radius() - rho;
    if side_pen <= 0.0 {
        return None;
    }
    let k = geom.wall_stiffness;
    if side_pen <= along && rho > TINY {
        let n = k * side_pen;
        Some(Contact {
            at: corner,
            force: radial.map(|c| -c / rho * n),
            normal: n,
            wall_pen: side_pen,
        })
    } else {
        // Rim pressed into the tip face.
        let n = k * along;
        Some(Contact {
            at: corner,
            force: axis.map(|c| c * n),
            normal: n,
            wall_pen: 0.0,
        })
    }
}
