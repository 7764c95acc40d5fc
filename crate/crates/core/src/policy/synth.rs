//! Synthetic demonstration corpus.
//!
//! Demonstrations start above the hand, out of the arm plane, ride along the
//! forearm and finish just short of the shoulder. Small elbow angles take
//! the outer route: the path turns a quarter turn toward the outside before
//! the elbow and keeps a wider berth there. Open arms lean toward the inner
//! side.

use std::f64::consts::PI;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use super::demos::DemonstrationRecord;
use crate::error::{Error, Result};
use crate::frame::{build_progress_curve, from_dressing, DressingCoord, ProgressCurve, Strategy};
use crate::geometry::{arm_plane_normal, forward_kinematics, wrap_angle, ArmPosture, JointAngles, LimbLengths, UnitVec3};

/// Elbow angles of the demonstration corpus, degrees.
pub const CORPUS_ANGLES_DEG: [f64; 10] = [80.47, 81.65, 87.49, 106.07, 131.0, 143.46, 149.30, 161.0, 170.0, 179.0];
/// Below this elbow angle demonstrators go around the outside, degrees.
pub const OUTER_BELOW_DEG: f64 = 120.0;
/// Starting distance above the hand, meters.
pub const START_CLEARANCE: f64 = 0.10;
/// Starting angle around the arm.
pub const START_ANGLE: f64 = 0.0;
/// Distance kept from the curve at the shoulder, meters.
pub const FINISH_CLEARANCE: f64 = 0.035;
pub const SAMPLES_PER_DEMO: usize = 60;
pub const SAMPLE_PERIOD: f64 = 0.05;

const L_NOISE: f64 = 5e-4;
const THETA_NOISE: f64 = 5e-3;

/// Shoulder pose shared by all demonstration postures.
const DEMO_ALPHA: f64 = -0.2;
const DEMO_BETA: f64 = -0.1;

/// Arm posture with the given elbow angle.
pub fn demo_posture(psi: f64, limbs: &LimbLengths) -> Result<ArmPosture> {
    if !(psi > 0.0 && psi <= PI) {
        return Err(Error::InvalidArgument(format!("elbow angle {psi} outside (0, pi]")));
    }
    Ok(forward_kinematics(
        &JointAngles::new(DEMO_ALPHA, DEMO_BETA, PI - psi, 0.0),
        limbs,
    ))
}

/// Angle `theta` that places a point on the inner side of the arm, inside
/// the elbow angle.
pub fn inner_side_angle(curve: &ProgressCurve, v: &UnitVec3) -> f64 {
    let a = curve.forearm_direction();
    let b = curve.upper_arm_direction();
    let inward = b - a * a.dot(b);
    // x - x_curve = -l (cos theta v + sin theta e2) should point inward.
    if inward.norm() < 1e-12 || a.cross(v).dot(&inward) < 0.0 {
        0.5 * PI
    } else {
        1.5 * PI
    }
}

/// Start reference `(l0, theta0)`: above the hand, out of the arm plane on
/// the side away from the body.
pub fn start_reference(_curve: &ProgressCurve, _v: &UnitVec3) -> (f64, f64) {
    (START_CLEARANCE, START_ANGLE)
}

fn smoothstep(a: f64, b: f64, x: f64) -> f64 {
    let t = ((x - a) / (b - a)).clamp(0.0, 1.0);
    t * t * (3.0 - 2.0 * t)
}

/// Shape of a demonstrated path in the dressing coordinate.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PathProfile {
    pub strategy: Strategy,
    /// Fraction of a quarter turn toward the chosen side reached by the
    /// elbow.
    pub tilt: f64,
    /// Distance to the curve while passing the elbow.
    pub elbow_clearance: f64,
}

impl PathProfile {
    /// Expert choice: outer route with a wide berth for small angles, a
    /// slight inward lean otherwise.
    pub fn expert(psi: f64) -> Self {
        if psi < OUTER_BELOW_DEG.to_radians() {
            Self {
                strategy: Strategy::Outer,
                tilt: 1.0,
                elbow_clearance: 0.12,
            }
        } else {
            Self {
                strategy: Strategy::Inner,
                tilt: 0.35,
                elbow_clearance: START_CLEARANCE,
            }
        }
    }

    /// Always fully inner; the gap at the elbow shrinks as the arm closes.
    pub fn inner_only(psi: f64) -> Self {
        let open = (psi.to_degrees() - OUTER_BELOW_DEG) / 60.0;
        Self {
            strategy: Strategy::Inner,
            tilt: 1.0,
            elbow_clearance: 0.02 + 0.08 * open,
        }
    }

    /// `(l, theta - theta0)` at progress `s` for an elbow at `s_elbow`;
    /// `inward` is the signed quarter turn from the start toward the inner
    /// side.
    pub fn at(&self, s: f64, s_elbow: f64, inward: f64) -> (f64, f64) {
        let approach = smoothstep(0.0, s_elbow, s);
        let finish = smoothstep((s_elbow + 0.1).min(0.95), 1.0, s);
        let l = START_CLEARANCE
            + (self.elbow_clearance - START_CLEARANCE) * approach
            + (FINISH_CLEARANCE - self.elbow_clearance) * finish;
        let side = match self.strategy {
            Strategy::Inner => inward,
            Strategy::Outer => -inward,
        };
        let turn = side * self.tilt * smoothstep(0.0, 0.8 * s_elbow, s);
        (l, turn)
    }
}

/// One synthetic demonstration.
pub fn synthesize_demo(
    posture: &ArmPosture,
    profile: &PathProfile,
    radius: f64,
    seed: u64,
) -> Result<DemonstrationRecord> {
    let curve = build_progress_curve(posture, radius)?;
    let v = arm_plane_normal(posture, None)?;
    let theta0 = START_ANGLE;
    let inward = wrap_angle(inner_side_angle(&curve, &v) - theta0);
    let s_elbow = curve.arc_midpoint_s();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let l_noise = Normal::new(0.0, L_NOISE).expect("valid deviation");
    let t_noise = Normal::new(0.0, THETA_NOISE).expect("valid deviation");

    let mut path = Vec::with_capacity(SAMPLES_PER_DEMO);
    let mut stamps = Vec::with_capacity(SAMPLES_PER_DEMO);
    for i in 0..SAMPLES_PER_DEMO {
        let s = i as f64 / (SAMPLES_PER_DEMO - 1) as f64;
        let (l, turn) = profile.at(s, s_elbow, inward);
        let (dl, dt) = if i == 0 {
            (0.0, 0.0)
        } else {
            (l_noise.sample(&mut rng), t_noise.sample(&mut rng))
        };
        let dc = DressingCoord::new(s, (l + dl).max(0.0), theta0 + turn + dt);
        path.push(from_dressing(&dc, &curve, &v)?);
        stamps.push(i as f64 * SAMPLE_PERIOD);
    }
    DemonstrationRecord::new(*posture, path, stamps)
}

fn corpus(
    angles_deg: &[f64],
    limbs: &LimbLengths,
    radius: f64,
    seed: u64,
    profile: fn(f64) -> PathProfile,
) -> Result<Vec<DemonstrationRecord>> {
    angles_deg
        .iter()
        .enumerate()
        .map(|(i, deg)| {
            let psi = deg.to_radians();
            let posture = demo_posture(psi, limbs)?;
            synthesize_demo(&posture, &profile(psi), radius, seed.wrapping_add(i as u64))
        })
        .collect()
}

/// Demonstrations following the expert strategy at every corpus angle.
pub fn expert_corpus(limbs: &LimbLengths, radius: f64, seed: u64) -> Result<Vec<DemonstrationRecord>> {
    corpus(&CORPUS_ANGLES_DEG, limbs, radius, seed, PathProfile::expert)
}

/// Inner-route demonstrations recorded only on open arms.
pub fn inner_only_corpus(limbs: &LimbLengths, radius: f64, seed: u64) -> Result<Vec<DemonstrationRecord>> {
    let open: Vec<f64> = CORPUS_ANGLES_DEG
        .iter()
        .copied()
        .filter(|d| *d >= OUTER_BELOW_DEG)
        .collect();
    corpus(&open, limbs, radius, seed, PathProfile::inner_only)
}
