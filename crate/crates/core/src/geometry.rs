//! Frames, rigid transforms and the four-angle arm model.
//!
//! All arm geometry lives in the shoulder frame: origin at the shoulder,
//! `+z` up, `+x` forward (the direction the person faces) and `+y` from the
//! right shoulder toward the body midline. At zero joint angles the arm
//! hangs straight down along `-z`.
//!
//! The hand position is
//!
//! ```text
//! p_h = Ry(alpha) * Rx(beta) * Rz(gamma) * [Lf sin(phi), 0, -Lu - Lf cos(phi)]
//! ```
//!
//! so `alpha` rotates the arm about `+y`, `beta` about `+x`, `gamma` spins
//! the upper arm about its own axis and `phi` flexes the elbow (`0` is a
//! straight arm). The interior elbow angle is exactly `pi - phi`.

use nalgebra::{Matrix3, Matrix3x4, Rotation3, Unit, Vector3, Vector4};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub type Vec3 = Vector3<f64>;
pub type Point3 = Vector3<f64>;
pub type UnitVec3 = Unit<Vector3<f64>>;

/// Tolerance on limb lengths when converting positions to angles.
pub const LENGTH_TOLERANCE: f64 = 1e-4;
/// Triangle area below which shoulder, elbow and hand count as collinear.
pub const COLLINEAR_AREA: f64 = 1e-8;
/// Default body reference point used to orient the arm-plane normal.
pub const DEFAULT_BODY_REFERENCE: [f64; 3] = [0.0, 0.3, 0.0];

/// Wraps an angle to `(-pi, pi]`.
pub fn wrap_angle(a: f64) -> f64 {
    use std::f64::consts::{PI, TAU};
    let mut w = a.rem_euclid(TAU);
    if w > PI {
        w -= TAU;
    }
    w
}

/// Rotation plus translation, `x' = R x + t`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RigidTransform {
    rotation: Matrix3<f64>,
    translation: Vec3,
}

impl RigidTransform {
    /// Builds a transform, rejecting rotations that are not proper
    /// orthonormal matrices within `1e-9`.
    pub fn new(rotation: Matrix3<f64>, translation: Vec3) -> Result<Self> {
        if !rotation.iter().chain(translation.iter()).all(|v| v.is_finite()) {
            return Err(Error::InvalidArgument("non-finite transform".into()));
        }
        let ortho = (rotation.transpose() * rotation - Matrix3::identity()).abs().max();
        let det = rotation.determinant();
        if ortho > 1e-9 || (det - 1.0).abs() > 1e-9 {
            return Err(Error::InvalidArgument(format!(
                "rotation is not orthonormal (|RtR - I| = {ortho:.3e}, det = {det})"
            )));
        }
        Ok(Self {
            rotation,
            translation,
        })
    }

    pub fn identity() -> Self {
        Self {
            rotation: Matrix3::identity(),
            translation: Vec3::zeros(),
        }
    }

    pub fn from_rotation(rotation: Rotation3<f64>, translation: Vec3) -> Self {
        Self {
            rotation: *rotation.matrix(),
            translation,
        }
    }

    pub fn rotation(&self) -> &Matrix3<f64> {
        &self.rotation
    }

    pub fn translation(&self) -> &Vec3 {
        &self.translation
    }

    pub fn transform_point(&self, x: &Point3) -> Point3 {
        self.rotation * x + self.translation
    }
}

/// Applies `x' = R x + t`.
pub fn transform_point(t: &RigidTransform, x: &Point3) -> Point3 {
    t.transform_point(x)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LimbLengths {
    /// Shoulder to elbow, meters.
    pub upper_arm: f64,
    /// Elbow to hand, meters.
    pub forearm: f64,
}

impl LimbLengths {
    pub fn new(upper_arm: f64, forearm: f64) -> Result<Self> {
        if !(upper_arm > 0.0 && forearm > 0.0 && upper_arm.is_finite() && forearm.is_finite()) {
            return Err(Error::InvalidArgument(format!(
                "limb lengths must be positive, got upper_arm={upper_arm}, forearm={forearm}"
            )));
        }
        Ok(Self { upper_arm, forearm })
    }

    /// Mannequin used for the demonstrations (elbow-shoulder 25.3 cm,
    /// hand-elbow 26.4 cm).
    pub fn mannequin() -> Self {
        Self {
            upper_arm: 0.253,
            forearm: 0.264,
        }
    }

    pub fn human_1() -> Self {
        Self {
            upper_arm: 0.296,
            forearm: 0.305,
        }
    }

    pub fn human_2() -> Self {
        Self {
            upper_arm: 0.263,
            forearm: 0.275,
        }
    }

    pub fn reach(&self) -> f64 {
        self.upper_arm + self.forearm
    }
}

/// Shoulder, elbow and hand positions in the shoulder frame.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ArmPosture {
    pub shoulder: Point3,
    pub elbow: Point3,
    pub hand: Point3,
}

impl ArmPosture {
    /// Posture with the shoulder at the origin.
    pub fn new(elbow: Point3, hand: Point3) -> Self {
        Self {
            shoulder: Point3::zeros(),
            elbow,
            hand,
        }
    }

    pub fn upper_arm_length(&self) -> f64 {
        (self.elbow - self.shoulder).norm()
    }

    pub fn forearm_length(&self) -> f64 {
        (self.hand - self.elbow).norm()
    }

    /// Limb lengths measured from the posture itself.
    pub fn limb_lengths(&self) -> Result<LimbLengths> {
        LimbLengths::new(self.upper_arm_length(), self.forearm_length())
    }

    pub fn is_finite(&self) -> bool {
        self.shoulder
            .iter()
            .chain(self.elbow.iter())
            .chain(self.hand.iter())
            .all(|v| v.is_finite())
    }
}

/// Shoulder `(alpha, beta)` and elbow `(phi, gamma)` angles in radians.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct JointAngles {
    pub alpha: f64,
    pub beta: f64,
    pub phi: f64,
    pub gamma: f64,
}

impl JointAngles {
    /// Normalizes into the canonical ranges: `alpha`, `beta`, `gamma` in
    /// `(-pi, pi]` and `phi` in `[0, pi]`. A negative flexion is folded into
    /// a half turn of `gamma`, which leaves the hand where it was.
    pub fn new(alpha: f64, beta: f64, phi: f64, gamma: f64) -> Self {
        let mut phi = wrap_angle(phi);
        let mut gamma = gamma;
        if phi < 0.0 {
            phi = -phi;
            gamma += std::f64::consts::PI;
        }
        Self {
            alpha: wrap_angle(alpha),
            beta: wrap_angle(beta),
            phi,
            gamma: wrap_angle(gamma),
        }
    }

    pub fn zero() -> Self {
        Self::new(0.0, 0.0, 0.0, 0.0)
    }

    pub fn from_vector(v: &Vector4<f64>) -> Self {
        Self::new(v[0], v[1], v[2], v[3])
    }

    pub fn to_vector(&self) -> Vector4<f64> {
        Vector4::new(self.alpha, self.beta, self.phi, self.gamma)
    }

    /// Adds a joint increment and renormalizes.
    pub fn offset(&self, delta: &Vector4<f64>) -> Self {
        Self::from_vector(&(self.to_vector() + delta))
    }

    pub fn is_finite(&self) -> bool {
        self.to_vector().iter().all(|v| v.is_finite())
    }
}

fn rot_x(a: f64) -> Rotation3<f64> {
    Rotation3::from_axis_angle(&Vector3::x_axis(), a)
}

fn rot_y(a: f64) -> Rotation3<f64> {
    Rotation3::from_axis_angle(&Vector3::y_axis(), a)
}

fn rot_z(a: f64) -> Rotation3<f64> {
    Rotation3::from_axis_angle(&Vector3::z_axis(), a)
}

/// Hand position in the upper-arm frame for flexion `phi`.
fn flexed_hand(phi: f64, l: &LimbLengths) -> Vec3 {
    Vec3::new(
        l.forearm * phi.sin(),
        0.0,
        -l.upper_arm - l.forearm * phi.cos(),
    )
}

/// Hand position `f(q)`.
pub fn hand_position(q: &JointAngles, l: &LimbLengths) -> Point3 {
    rot_y(q.alpha) * rot_x(q.beta) * rot_z(q.gamma) * flexed_hand(q.phi, l)
}

pub fn forward_kinematics(q: &JointAngles, l: &LimbLengths) -> ArmPosture {
    let shoulder_rot = rot_y(q.alpha) * rot_x(q.beta);
    let elbow = shoulder_rot * Vec3::new(0.0, 0.0, -l.upper_arm);
    let hand = shoulder_rot * rot_z(q.gamma) * flexed_hand(q.phi, l);
    ArmPosture::new(elbow, hand)
}

/// Recovers joint angles from positions. `beta` is returned in
/// `[-pi/2, pi/2]`; a straight arm resolves `gamma` to zero.
pub fn joint_angles_from_posture(p: &ArmPosture, l: &LimbLengths) -> Result<JointAngles> {
    let upper = p.elbow - p.shoulder;
    let fore = p.hand - p.elbow;
    check_length("upper arm", upper.norm(), l.upper_arm)?;
    check_length("forearm", fore.norm(), l.forearm)?;

    let u = upper.normalize();
    let horizontal = u.x.hypot(u.z);
    if horizontal < 1e-12 {
        return Err(Error::SingularPosture(
            "upper arm aligned with the shoulder y axis (alpha unobservable)",
        ));
    }
    let beta = u.y.atan2(horizontal);
    let alpha = (-u.x).atan2(-u.z);

    let w = (rot_y(alpha) * rot_x(beta)).inverse() * fore.normalize();
    let radial = w.x.hypot(w.y);
    let phi = radial.atan2(-w.z);
    let gamma = if radial < 1e-12 { 0.0 } else { w.y.atan2(w.x) };
    Ok(JointAngles::new(alpha, beta, phi, gamma))
}

fn check_length(what: &'static str, actual: f64, expected: f64) -> Result<()> {
    if (actual - expected).abs() > LENGTH_TOLERANCE || !actual.is_finite() {
        return Err(Error::LengthMismatch {
            what,
            actual,
            expected,
        });
    }
    Ok(())
}

/// `d f / d q`, columns ordered `(alpha, beta, phi, gamma)`.
pub fn jacobian(q: &JointAngles, l: &LimbLengths) -> Matrix3x4<f64> {
    let ry = rot_y(q.alpha);
    let rx = rot_x(q.beta);
    let rz = rot_z(q.gamma);
    let a = flexed_hand(q.phi, l);
    let da = Vec3::new(l.forearm * q.phi.cos(), 0.0, l.forearm * q.phi.sin());

    let rza = rz * a;
    let rxrza = rx * rza;
    let d_alpha = ry * Vector3::y().cross(&rxrza);
    let d_beta = ry * (rx * Vector3::x().cross(&rza));
    let d_phi = ry * rx * rz * da;
    let d_gamma = ry * rx * (rz * Vector3::z().cross(&a));
    Matrix3x4::from_columns(&[d_alpha, d_beta, d_phi, d_gamma])
}

/// Interior angle at the elbow, in `[0, pi]`.
pub fn elbow_angle(p: &ArmPosture) -> Result<f64> {
    let to_shoulder = p.shoulder - p.elbow;
    let to_hand = p.hand - p.elbow;
    if to_shoulder.norm() <= 1e-9 || to_hand.norm() <= 1e-9 {
        return Err(Error::DegeneratePosture(
            "elbow coincides with shoulder or hand",
        ));
    }
    Ok(to_shoulder.cross(&to_hand).norm().atan2(to_shoulder.dot(&to_hand)))
}

/// Unit normal of the arm plane, oriented toward the default body point.
pub fn arm_plane_normal(p: &ArmPosture, previous: Option<&UnitVec3>) -> Result<UnitVec3> {
    arm_plane_normal_toward(p, &Point3::from(DEFAULT_BODY_REFERENCE), previous)
}

/// Unit normal of the plane through shoulder, elbow and hand with positive
/// dot product against `body_ref - elbow`. Falls back to `previous` when the
/// three points are collinear.
pub fn arm_plane_normal_toward(
    p: &ArmPosture,
    body_ref: &Point3,
    previous: Option<&UnitVec3>,
) -> Result<UnitVec3> {
    let n = (p.elbow - p.shoulder).cross(&(p.hand - p.elbow));
    if 0.5 * n.norm() < COLLINEAR_AREA {
        return previous.copied().ok_or(Error::DegeneratePosture(
            "shoulder, elbow and hand are collinear; arm plane undefined",
        ));
    }
    let mut n = n.normalize();
    let side = n.dot(&(body_ref - p.elbow));
    if side < 0.0 || (side == 0.0 && previous.is_some_and(|prev| prev.dot(&n) < 0.0)) {
        n = -n;
    }
    Ok(Unit::new_unchecked(n))
}
