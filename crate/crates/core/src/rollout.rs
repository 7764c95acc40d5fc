//! Closed-loop simulation: simulated person, elbow tracker and dressing
//! policy advancing in lockstep.
//!
//! The policy only ever sees the estimated posture. Ground truth is kept
//! for scoring.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::estimator::{EstimatorWeights, Tracker};
use crate::frame::{build_progress_curve, locate, DEFAULT_ARC_RADIUS};
use crate::geometry::{arm_plane_normal, elbow_angle, ArmPosture, LimbLengths, Point3, UnitVec3};
use crate::policy::progress::{step_progress, ProgressDynamics};
use crate::policy::synth::start_reference;
use crate::policy::{generate_waypoint, DressingPolicy};
use crate::stretch::{HumanResponseModel, StiffnessConfig, StretchSimulator};

pub const DEFAULT_DT: f64 = 0.01;
pub const DEFAULT_MAX_STEPS: usize = 400;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum RolloutMode {
    /// The person follows the guidance without drift or noise.
    Compliant,
    /// The person's configured drift and noise apply.
    #[serde(rename = "noncompliant")]
    NonCompliant,
    /// The hand never moves.
    #[serde(rename = "static")]
    StaticArm,
}

impl std::str::FromStr for RolloutMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "compliant" => Ok(Self::Compliant),
            "noncompliant" => Ok(Self::NonCompliant),
            "static" => Ok(Self::StaticArm),
            other => Err(Error::InvalidArgument(format!(
                "unknown mode {other:?} (expected compliant, noncompliant or static)"
            ))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SuccessThresholds {
    /// Final gripper distance to the shoulder, meters.
    pub shoulder_radius: f64,
    /// Smallest allowed distance to the true arm curve, meters.
    pub collision_floor: f64,
}

impl Default for SuccessThresholds {
    fn default() -> Self {
        Self {
            shoulder_radius: 0.06,
            collision_floor: 0.015,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RolloutConfig {
    pub initial_posture: ArmPosture,
    pub limbs: LimbLengths,
    #[serde(default)]
    pub human: HumanResponseModel,
    #[serde(default)]
    pub stiffness: StiffnessConfig,
    #[serde(default = "EstimatorWeights::recorded_stretch")]
    pub weights: EstimatorWeights,
    #[serde(default)]
    pub dynamics: ProgressDynamics,
    #[serde(default = "default_radius")]
    pub arc_radius: f64,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_max_steps")]
    pub max_steps: usize,
    pub mode: RolloutMode,
    #[serde(default = "default_dt")]
    pub dt: f64,
    #[serde(default)]
    pub thresholds: SuccessThresholds,
}

fn default_radius() -> f64 {
    DEFAULT_ARC_RADIUS
}

fn default_max_steps() -> usize {
    DEFAULT_MAX_STEPS
}

fn default_dt() -> f64 {
    DEFAULT_DT
}

impl RolloutConfig {
    /// Defaults around a posture and mode.
    pub fn new(initial_posture: ArmPosture, limbs: LimbLengths, mode: RolloutMode) -> Self {
        Self {
            initial_posture,
            limbs,
            human: HumanResponseModel::default(),
            stiffness: StiffnessConfig::default(),
            weights: EstimatorWeights::recorded_stretch(),
            dynamics: ProgressDynamics::default(),
            arc_radius: DEFAULT_ARC_RADIUS,
            seed: 0,
            max_steps: DEFAULT_MAX_STEPS,
            mode,
            dt: DEFAULT_DT,
            thresholds: SuccessThresholds::default(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.max_steps == 0 {
            return Err(Error::InvalidArgument("max_steps must be positive".into()));
        }
        if !(self.dt > 0.0 && self.dt.is_finite()) {
            return Err(Error::InvalidArgument(format!("dt must be positive, got {}", self.dt)));
        }
        if !(self.arc_radius > 0.0) {
            return Err(Error::InvalidArgument("arc radius must be positive".into()));
        }
        ProgressDynamics::new(self.dynamics.c, self.dynamics.s_target)?;
        EstimatorWeights::new(self.weights.q_diag)?;
        StiffnessConfig::new(self.stiffness.k_x, self.stiffness.damping)?;
        self.human.validate()
    }

    fn effective_human(&self) -> HumanResponseModel {
        match self.mode {
            RolloutMode::Compliant => self.human.without_perturbation(),
            _ => self.human,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Outcome {
    Success,
    CollisionFailure,
    NoConvergence,
}

impl std::fmt::Display for Outcome {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Outcome::Success => "Success",
            Outcome::CollisionFailure => "CollisionFailure",
            Outcome::NoConvergence => "NoConvergence",
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RolloutResult {
    pub true_postures: Vec<ArmPosture>,
    pub estimated_postures: Vec<ArmPosture>,
    pub gripper_path: Vec<Point3>,
    pub s_trace: Vec<f64>,
    pub elbow_error_trace: Vec<f64>,
    /// Distance of each waypoint to the true arm curve.
    pub clearance_trace: Vec<f64>,
    pub extrapolated_steps: usize,
    pub clamped_steps: usize,
    pub outcome: Outcome,
    pub outcome_detail: String,
}

impl RolloutResult {
    pub fn len(&self) -> usize {
        self.s_trace.len()
    }

    pub fn is_empty(&self) -> bool {
        self.s_trace.is_empty()
    }

    pub fn max_elbow_error(&self) -> f64 {
        self.elbow_error_trace.iter().copied().fold(0.0, f64::max)
    }

    pub fn final_shoulder_distance(&self) -> Option<f64> {
        Some((self.gripper_path.last()? - self.true_postures.last()?.shoulder).norm())
    }
}

/// Distance of `x` to the progress curve of the true posture.
pub fn clearance(x: &Point3, posture: &ArmPosture, radius: f64, previous: Option<&UnitVec3>) -> Result<f64> {
    let curve = build_progress_curve(posture, radius)?;
    let v = arm_plane_normal(posture, previous)?;
    match locate(x, &curve, &v) {
        Ok(located) => Ok(located.coord.l),
        // Exactly on the arc center: one radius from every arc point.
        Err(Error::AmbiguousProjection) => Ok(curve.radius),
        Err(e) => Err(e),
    }
}

struct Recorder {
    result: RolloutResult,
    true_normal: Option<UnitVec3>,
    radius: f64,
}

impl Recorder {
    fn push(&mut self, truth: ArmPosture, estimate: ArmPosture, gripper: Point3, s: f64) -> Result<()> {
        let normal = arm_plane_normal(&truth, self.true_normal.as_ref())?;
        self.true_normal = Some(normal);
        let l = clearance(&gripper, &truth, self.radius, Some(&normal))?;
        let r = &mut self.result;
        r.elbow_error_trace.push((truth.elbow - estimate.elbow).norm());
        r.true_postures.push(truth);
        r.estimated_postures.push(estimate);
        r.gripper_path.push(gripper);
        r.s_trace.push(s);
        r.clearance_trace.push(l);
        Ok(())
    }
}

/// Runs the closed loop until the progress target is reached or the step
/// budget runs out. Module errors end the run as `NoConvergence`.
pub fn run_rollout(cfg: &RolloutConfig, policy: &DressingPolicy) -> Result<RolloutResult> {
    cfg.validate()?;
    let mut rec = Recorder {
        result: RolloutResult {
            true_postures: Vec::new(),
            estimated_postures: Vec::new(),
            gripper_path: Vec::new(),
            s_trace: Vec::new(),
            elbow_error_trace: Vec::new(),
            clearance_trace: Vec::new(),
            extrapolated_steps: 0,
            clamped_steps: 0,
            outcome: Outcome::NoConvergence,
            outcome_detail: String::new(),
        },
        true_normal: None,
        radius: cfg.arc_radius,
    };
    match drive(cfg, policy, &mut rec) {
        Ok(()) => {
            let (outcome, detail) = evaluate_success(
                &rec.result.s_trace,
                &rec.result.gripper_path,
                &rec.result.true_postures,
                &rec.result.clearance_trace,
                cfg.dynamics.s_target,
                &cfg.thresholds,
            );
            rec.result.outcome = outcome;
            rec.result.outcome_detail = detail;
        }
        Err(e) => {
            rec.result.outcome = Outcome::NoConvergence;
            rec.result.outcome_detail = format!("aborted after {} steps: {e}", rec.result.len());
        }
    }
    Ok(rec.result)
}

fn drive(cfg: &RolloutConfig, policy: &DressingPolicy, rec: &mut Recorder) -> Result<()> {
    let mut sim = StretchSimulator::new(
        &cfg.initial_posture,
        cfg.limbs,
        cfg.stiffness,
        cfg.effective_human(),
        cfg.dt,
        cfg.seed,
    )?;
    let truth = sim.posture();
    let mut tracker = Tracker::new(&truth, cfg.limbs, cfg.weights)?;
    let estimate = tracker.posture();

    let mut normal = arm_plane_normal(&estimate, None)?;
    let curve = build_progress_curve(&estimate, cfg.arc_radius)?;
    let start = start_reference(&curve, &normal);
    let mut s = 0.0;
    let psi = elbow_angle(&estimate)?;
    let wp = generate_waypoint(policy, s, psi, start, &curve, &normal)?;
    rec.result.extrapolated_steps += wp.extrapolated as usize;
    rec.result.clamped_steps += wp.radius_clamped as usize;
    rec.push(truth, estimate, wp.point, s)?;

    for _ in 0..cfg.max_steps {
        if s >= cfg.dynamics.s_target {
            break;
        }
        let truth = match cfg.mode {
            RolloutMode::StaticArm => sim.posture(),
            _ => sim.step()?,
        };
        let estimate = tracker.update(&truth.hand)?;
        normal = arm_plane_normal(&estimate, Some(&normal))?;
        let curve = build_progress_curve(&estimate, cfg.arc_radius)?;
        let psi = elbow_angle(&estimate)?;
        s = step_progress(s, &cfg.dynamics);
        let wp = generate_waypoint(policy, s, psi, start, &curve, &normal)?;
        rec.result.extrapolated_steps += wp.extrapolated as usize;
        rec.result.clamped_steps += wp.radius_clamped as usize;
        rec.push(truth, estimate, wp.point, s)?;
    }
    Ok(())
}

/// Scores a finished trace. Collisions are reported first, then failure to
/// reach the progress target, then a final gripper too far from the
/// shoulder.
pub fn evaluate_success(
    s_trace: &[f64],
    gripper_path: &[Point3],
    true_postures: &[ArmPosture],
    clearance_trace: &[f64],
    s_target: f64,
    thresholds: &SuccessThresholds,
) -> (Outcome, String) {
    let (Some(&s_final), Some(gripper), Some(truth)) =
        (s_trace.last(), gripper_path.last(), true_postures.last())
    else {
        return (Outcome::NoConvergence, "empty trace".into());
    };
    if let Some((i, l)) = clearance_trace
        .iter()
        .enumerate()
        .find(|(_, l)| **l < thresholds.collision_floor)
    {
        return (
            Outcome::CollisionFailure,
            format!("step {i}: clearance {l:.4} m below floor {:.4} m", thresholds.collision_floor),
        );
    }
    if s_final < s_target {
        return (
            Outcome::NoConvergence,
            format!("stopped at s = {s_final:.4} before target {s_target:.4}"),
        );
    }
    let distance = (gripper - truth.shoulder).norm();
    if distance > thresholds.shoulder_radius {
        return (
            Outcome::NoConvergence,
            format!("final gripper {distance:.4} m from the shoulder"),
        );
    }
    (
        Outcome::Success,
        format!("final gripper {distance:.4} m from the shoulder"),
    )
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EstimationSummary {
    pub max_error: f64,
    pub mean_error: f64,
}

impl EstimationSummary {
    pub fn of(errors: &[f64]) -> Self {
        if errors.is_empty() {
            return Self {
                max_error: 0.0,
                mean_error: 0.0,
            };
        }
        Self {
            max_error: errors.iter().copied().fold(0.0, f64::max),
            mean_error: errors.iter().sum::<f64>() / errors.len() as f64,
        }
    }
}

/// Elbow error per step of a stretch tracked from hand samples alone, for
/// `max_steps` steps. The first entry is the known initial posture.
pub fn estimation_errors(cfg: &RolloutConfig) -> Result<Vec<f64>> {
    cfg.validate()?;
    let mut sim = StretchSimulator::new(
        &cfg.initial_posture,
        cfg.limbs,
        cfg.stiffness,
        cfg.effective_human(),
        cfg.dt,
        cfg.seed,
    )?;
    let truth = sim.posture();
    let mut tracker = Tracker::new(&truth, cfg.limbs, cfg.weights)?;
    let mut errors = vec![(truth.elbow - tracker.posture().elbow).norm()];
    for _ in 0..cfg.max_steps {
        let truth = match cfg.mode {
            RolloutMode::StaticArm => sim.posture(),
            _ => sim.step()?,
        };
        let estimate = tracker.update(&truth.hand)?;
        errors.push((truth.elbow - estimate.elbow).norm());
    }
    Ok(errors)
}

/// Max and mean elbow error for each case.
pub fn evaluate_estimation(cases: &[RolloutConfig]) -> Result<Vec<EstimationSummary>> {
    if cases.is_empty() {
        return Err(Error::InsufficientData { got: 0, need: 1 });
    }
    cases
        .iter()
        .map(|c| estimation_errors(c).map(|e| EstimationSummary::of(&e)))
        .collect()
}
