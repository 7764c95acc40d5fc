//! Vision-free elbow tracking.
//!
//! Only the hand is observed (it is held by the interactive robot) and the
//! shoulder is assumed static. Each hand displacement is explained by the
//! joint increment that minimizes `dq' Q dq` subject to `J(q) dq = dp`. With
//! a 3x4 Jacobian the feasible set is `J+ dp + lambda * mu` for the null
//! vector `mu`, so the optimum is a single scalar projection:
//!
//! ```text
//! dq* = J+ dp - (mu' Q J+ dp / mu' Q mu) mu
//! ```
//!
//! Increments are accumulated recursively from a known initial posture.

use nalgebra::{Matrix3, Matrix3x4, Vector4};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{
    forward_kinematics, hand_position, jacobian, joint_angles_from_posture, ArmPosture,
    JointAngles, LimbLengths, Point3, RigidTransform, Vec3,
};

/// Largest hand displacement solved in one linearized step, meters.
pub const STEP_CAP: f64 = 0.005;
/// Allowed offset between the first tracked hand sample and the initial hand.
pub const INITIAL_HAND_TOLERANCE: f64 = 0.005;
/// Singular values below this are treated as zero.
pub const SINGULAR_VALUE_FLOOR: f64 = 1e-10;
/// Flexion below which the arm counts as straight.
pub const STRAIGHT_ARM_PHI: f64 = 1e-3;
/// Diagonal damping added to `J J'` near the straight arm.
pub const STRAIGHT_ARM_DAMPING: f64 = 1e-6;

const RESIDUAL_TARGET: f64 = 1e-10;
const RESIDUAL_LIMIT: f64 = 1e-6;
const MAX_CORRECTIONS: usize = 200;

const JOINT_NAMES: [&str; 4] = ["alpha", "beta", "phi", "gamma"];

/// Diagonal of the joint weighting matrix `Q`. A larger weight marks a joint
/// that is less likely to move.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EstimatorWeights {
    pub q_diag: [f64; 4],
}

impl EstimatorWeights {
    pub fn new(q_diag: [f64; 4]) -> Result<Self> {
        if q_diag.iter().any(|w| !(w.is_finite() && *w > 0.0)) {
            return Err(Error::InvalidArgument(format!(
                "weights must be positive and finite, got {q_diag:?}"
            )));
        }
        Ok(Self { q_diag })
    }

    pub fn identity() -> Self {
        Self { q_diag: [1.0; 4] }
    }

    /// Weights fitted on a recorded stretch of a real arm.
    pub fn recorded_stretch() -> Self {
        Self {
            q_diag: [207.89, 654.28, 99.89, 184.65],
        }
    }

    pub fn as_vector(&self) -> Vector4<f64> {
        Vector4::from(self.q_diag)
    }

    /// `x' Q x`.
    pub fn quadratic_form(&self, x: &Vector4<f64>) -> f64 {
        x.iter()
            .zip(self.q_diag.iter())
            .map(|(v, w)| w * v * v)
            .sum()
    }
}

/// `Q = diag(1 / sum(dq_i^2))` over adjacent differences of a recorded
/// angle trajectory. With `regularized`, `1e-8` is added to each sum so a
/// joint that never moves gets a large finite weight instead of an error.
pub fn compute_weights(trajectory: &[JointAngles], regularized: bool) -> Result<EstimatorWeights> {
    if trajectory.len() < 2 {
        return Err(Error::InsufficientData {
            got: trajectory.len(),
            need: 2,
        });
    }
    let mut sums = [0.0f64; 4];
    for pair in trajectory.windows(2) {
        let d = pair[1].to_vector() - pair[0].to_vector();
        for (s, v) in sums.iter_mut().zip(d.iter()) {
            *s += v * v;
        }
    }
    let mut q = [0.0; 4];
    for i in 0..4 {
        let s = if regularized { sums[i] + 1e-8 } else { sums[i] };
        if s == 0.0 {
            return Err(Error::DegenerateTrajectory {
                joint: JOINT_NAMES[i],
            });
        }
        q[i] = 1.0 / s;
    }
    EstimatorWeights::new(q)
}

/// Unit vector spanning the null space of a full-rank 3x4 matrix, from its
/// signed 3x3 minors. The sign makes the first non-zero entry positive.
pub fn null_vector(j: &Matrix3x4<f64>) -> Vector4<f64> {
    let minor = |skip: usize| {
        let cols: Vec<_> = (0..4).filter(|&c| c != skip).map(|c| j.column(c)).collect();
        Matrix3::from_columns(&cols).determinant()
    };
    let mut mu = Vector4::new(-minor(0), minor(1), -minor(2), minor(3));
    let norm = mu.norm();
    if norm > 0.0 {
        mu /= norm;
    }
    if let Some(first) = mu.iter().copied().find(|v| v.abs() > 1e-14) {
        if first < 0.0 {
            mu = -mu;
        }
    }
    mu
}

/// Pieces of the weighted minimum-motion solution.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NullSpaceSolution {
    /// Minimum-norm solution `J+ dp`.
    pub particular: Vector4<f64>,
    /// Unit null vector of `J`.
    pub null_vector: Vector4<f64>,
    /// Null-space gain `-mu' Q dq_h / mu' Q mu`.
    pub gain: f64,
    pub delta_q: Vector4<f64>,
}

/// Solves `min dq' Q dq s.t. J dq = dp` in closed form.
pub fn solve_null_space(
    j: &Matrix3x4<f64>,
    delta_hand: &Vec3,
    weights: &EstimatorWeights,
) -> Result<NullSpaceSolution> {
    let svd = j.svd(false, false);
    let smallest = svd.singular_values.min();
    if smallest <= SINGULAR_VALUE_FLOOR {
        return Err(Error::SingularJacobian(smallest));
    }
    let pinv = j
        .pseudo_inverse(SINGULAR_VALUE_FLOOR)
        .map_err(|_| Error::SingularJacobian(smallest))?;
    let particular = pinv * delta_hand;
    let mu = null_vector(j);
    let q = weights.as_vector();
    let qmu = mu.component_mul(&q);
    let gain = -qmu.dot(&particular) / qmu.dot(&mu);
    Ok(NullSpaceSolution {
        particular,
        null_vector: mu,
        gain,
        delta_q: particular + mu * gain,
    })
}

/// Joint increment reproducing `delta_hand` with the least weighted motion.
pub fn solve_delta_q(
    q: &JointAngles,
    delta_hand: &Vec3,
    weights: &EstimatorWeights,
    limbs: &LimbLengths,
) -> Result<Vector4<f64>> {
    Ok(solve_null_space(&jacobian(q, limbs), delta_hand, weights)?.delta_q)
}

/// Damped least squares used when the arm is nearly straight and the null
/// space is no longer one-dimensional.
fn damped_delta_q(j: &Matrix3x4<f64>, delta_hand: &Vec3) -> Result<Vector4<f64>> {
    let jjt = j * j.transpose() + Matrix3::identity() * STRAIGHT_ARM_DAMPING;
    let inv = jjt
        .try_inverse()
        .ok_or(Error::SingularJacobian(0.0))?;
    Ok(j.transpose() * (inv * delta_hand))
}

fn increment(
    q: &JointAngles,
    delta_hand: &Vec3,
    weights: &EstimatorWeights,
    limbs: &LimbLengths,
) -> Result<Vector4<f64>> {
    let j = jacobian(q, limbs);
    if q.phi < STRAIGHT_ARM_PHI {
        return damped_delta_q(&j, delta_hand);
    }
    match solve_null_space(&j, delta_hand, weights) {
        Ok(sol) => Ok(sol.delta_q),
        Err(Error::SingularJacobian(_)) => damped_delta_q(&j, delta_hand),
        Err(e) => Err(e),
    }
}

/// Moves `q` so its hand lands on `target` with least weighted motion:
/// linearized steps of at most [`STEP_CAP`], then corrective iterations on
/// the remaining residual.
pub fn move_hand_to(
    q: &JointAngles,
    target: &Point3,
    weights: &EstimatorWeights,
    limbs: &LimbLengths,
) -> Result<JointAngles> {
    let start = hand_position(q, limbs);
    let delta = target - start;
    let pieces = ((delta.norm() / STEP_CAP).ceil() as usize).max(1);
    let mut q = *q;
    for k in 1..=pieces {
        let waypoint = start + delta * (k as f64 / pieces as f64);
        let dp = waypoint - hand_position(&q, limbs);
        q = q.offset(&increment(&q, &dp, weights, limbs)?);
    }
    let mut residual = target - hand_position(&q, limbs);
    let mut iterations = 0;
    while residual.norm() > RESIDUAL_TARGET && iterations < MAX_CORRECTIONS {
        q = q.offset(&increment(&q, &residual, weights, limbs)?);
        residual = target - hand_position(&q, limbs);
        iterations += 1;
    }
    if residual.norm() > RESIDUAL_LIMIT || !q.is_finite() {
        return Err(Error::NumericalUnderflow(
            "hand constraint not met after corrective iterations",
        ));
    }
    Ok(q)
}

/// Recursive estimate of the joint angles.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PostureEstimate {
    pub q_hat: JointAngles,
    pub step_index: usize,
}

impl PostureEstimate {
    pub fn initial(q: JointAngles) -> Self {
        Self {
            q_hat: q,
            step_index: 0,
        }
    }
}

/// One recursion: explain the new hand sample with a weighted
/// minimum-motion joint update.
pub fn step_estimate(
    prev: &PostureEstimate,
    hand_now: &Point3,
    limbs: &LimbLengths,
    weights: &EstimatorWeights,
) -> Result<PostureEstimate> {
    if !hand_now.iter().all(|v| v.is_finite()) {
        return Err(Error::InvalidArgument("non-finite hand sample".into()));
    }
    let distance = hand_now.norm();
    if distance > limbs.reach() {
        return Err(Error::UnreachableHand {
            distance,
            reach: limbs.reach(),
        });
    }
    let q_hat = move_hand_to(&prev.q_hat, hand_now, weights, limbs)?;
    Ok(PostureEstimate {
        q_hat,
        step_index: prev.step_index + 1,
    })
}

/// Stateful wrapper around [`step_estimate`].
#[derive(Debug, Clone)]
pub struct Tracker {
    limbs: LimbLengths,
    weights: EstimatorWeights,
    estimate: PostureEstimate,
}

impl Tracker {
    pub fn new(initial: &ArmPosture, limbs: LimbLengths, weights: EstimatorWeights) -> Result<Self> {
        let q = joint_angles_from_posture(initial, &limbs)?;
        Ok(Self {
            limbs,
            weights,
            estimate: PostureEstimate::initial(q),
        })
    }

    pub fn estimate(&self) -> &PostureEstimate {
        &self.estimate
    }

    pub fn posture(&self) -> ArmPosture {
        forward_kinematics(&self.estimate.q_hat, &self.limbs)
    }

    pub fn limbs(&self) -> &LimbLengths {
        &self.limbs
    }

    pub fn update(&mut self, hand: &Point3) -> Result<ArmPosture> {
        self.estimate = step_estimate(&self.estimate, hand, &self.limbs, &self.weights)?;
        Ok(self.posture())
    }
}

/// Estimates one posture per hand sample, starting from a known posture.
pub fn track(
    initial: &ArmPosture,
    hand_path: &[Point3],
    limbs: &LimbLengths,
    weights: &EstimatorWeights,
) -> Result<Vec<ArmPosture>> {
    let mut tracker = Tracker::new(initial, *limbs, *weights)?;
    if let Some(first) = hand_path.first() {
        let offset = (first - initial.hand).norm();
        if offset > INITIAL_HAND_TOLERANCE {
            return Err(Error::InitialHandMismatch { offset });
        }
    }
    hand_path.iter().map(|h| tracker.update(h)).collect()
}

/// Hand position in the dressing-robot frame from the interactive robot's
/// end effector and the calibrated transform between the two bases.
pub fn hand_in_dressing_frame(end_effector: &Point3, calibration: &RigidTransform) -> Point3 {
    calibration.transform_point(end_effector)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use std::f64::consts::FRAC_PI_2;

    fn bent() -> JointAngles {
        JointAngles::new(0.3, -0.2, 1.1, 0.4)
    }

    #[test]
    fn weights_from_single_step() {
        let q0 = JointAngles::zero();
        let q1 = JointAngles::new(0.1, 0.05, 0.2, 0.08);
        let w = compute_weights(&[q0, q1], false).unwrap();
        let expected = [100.0, 400.0, 25.0, 156.25];
        for (a, b) in w.q_diag.iter().zip(expected) {
            assert_relative_eq!(*a, b, max_relative = 1e-12);
        }
    }

    #[test]
    fn constant_trajectory_is_degenerate() {
        let q = JointAngles::new(0.1, 0.1, 0.5, 0.1);
        assert!(matches!(
            compute_weights(&[q, q, q], false),
            Err(Error::DegenerateTrajectory { joint: "alpha" })
        ));
        let w = compute_weights(&[q, q], true).unwrap();
        assert_relative_eq!(w.q_diag[0], 1e8, max_relative = 1e-12);
    }

    #[test]
    fn zero_displacement_gives_zero_increment() {
        let l = LimbLengths::mannequin();
        let dq = solve_delta_q(&bent(), &Vec3::zeros(), &EstimatorWeights::recorded_stretch(), &l)
            .unwrap();
        assert_eq!(dq.norm(), 0.0);
    }

    #[test]
    fn identity_weights_give_pseudoinverse() {
        let l = LimbLengths::mannequin();
        let q = bent();
        let dp = Vec3::new(0.002, -0.001, 0.003);
        let sol = solve_null_space(&jacobian(&q, &l), &dp, &EstimatorWeights::identity()).unwrap();
        assert!(sol.gain.abs() < 1e-12);
        assert_relative_eq!(sol.delta_q, sol.particular, epsilon = 1e-12);
    }

    #[test]
    fn null_vector_annihilated() {
        let l = LimbLengths::mannequin();
        let j = jacobian(&bent(), &l);
        let mu = null_vector(&j);
        assert_relative_eq!(mu.norm(), 1.0, epsilon = 1e-12);
        assert!((j * mu).norm() < 1e-12);
        assert!(mu.iter().find(|v| v.abs() > 1e-14).unwrap() > &0.0);
    }

    #[test]
    fn straight_arm_is_singular_for_closed_form() {
        let l = LimbLengths::mannequin();
        let r = solve_delta_q(
            &JointAngles::zero(),
            &Vec3::new(0.001, 0.0, 0.0),
            &EstimatorWeights::identity(),
            &l,
        );
        assert!(matches!(r, Err(Error::SingularJacobian(_))));
    }

    #[test]
    fn fixed_point_and_constraint() {
        let l = LimbLengths::mannequin();
        let w = EstimatorWeights::recorded_stretch();
        let est = PostureEstimate::initial(bent());
        let same = step_estimate(&est, &hand_position(&bent(), &l), &l, &w).unwrap();
        assert_relative_eq!(same.q_hat.to_vector(), bent().to_vector(), epsilon = 1e-15);
        assert_eq!(same.step_index, 1);

        let target = hand_position(&bent(), &l) + Vec3::new(0.02, 0.01, -0.015);
        let moved = step_estimate(&est, &target, &l, &w).unwrap();
        assert!((hand_position(&moved.q_hat, &l) - target).norm() < 1e-9);
    }

    #[test]
    fn unreachable_hand() {
        let l = LimbLengths::mannequin();
        let far = Point3::new(0.0, 0.0, -1.1 * l.reach());
        let r = step_estimate(
            &PostureEstimate::initial(bent()),
            &far,
            &l,
            &EstimatorWeights::identity(),
        );
        assert!(matches!(r, Err(Error::UnreachableHand { .. })));
    }

    #[test]
    fn track_constant_path() {
        let l = LimbLengths::mannequin();
        let p0 = forward_kinematics(&JointAngles::new(0.0, 0.0, FRAC_PI_2, 0.0), &l);
        let path = vec![p0.hand; 5];
        let out = track(&p0, &path, &l, &EstimatorWeights::recorded_stretch()).unwrap();
        assert_eq!(out.len(), 5);
        for p in out {
            assert!((p.elbow - p0.elbow).norm() < 1e-12);
        }
    }

    #[test]
    fn track_rejects_displaced_start() {
        let l = LimbLengths::mannequin();
        let p0 = forward_kinematics(&bent(), &l);
        let path = vec![p0.hand + Vec3::new(0.05, 0.0, 0.0)];
        assert!(matches!(
            track(&p0, &path, &l, &EstimatorWeights::identity()),
            Err(Error::InitialHandMismatch { .. })
        ));
    }

    #[test]
    fn near_straight_arm_tracks_with_damping() {
        let l = LimbLengths::mannequin();
        let q = JointAngles::new(0.2, 0.1, 5e-4, 0.0);
        let est = PostureEstimate::initial(q);
        let target = hand_position(&q, &l) + Vec3::new(0.003, -0.002, 0.004);
        let out = step_estimate(&est, &target, &l, &EstimatorWeights::recorded_stretch()).unwrap();
        assert!((hand_position(&out.q_hat, &l) - target).norm() < 1e-6);
    }

    #[test]
    fn calibration_path() {
        let x = Point3::new(1.0, 2.0, 3.0);
        assert_eq!(hand_in_dressing_frame(&x, &RigidTransform::identity()), x);
    }
}
