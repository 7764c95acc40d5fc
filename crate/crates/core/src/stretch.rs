//! Stretch guidance by the interactive robot.
//!
//! The elbow angle only depends on the shoulder-hand distance, so pulling
//! the hand straight away from the shoulder opens the elbow fastest. The
//! robot is stiff along that direction and fully compliant across it, which
//! makes the global stiffness the rank-one matrix `k d d'`.

use nalgebra::{Matrix3, Rotation3, Unit};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::estimator::{move_hand_to, EstimatorWeights};
use crate::geometry::{
    elbow_angle, forward_kinematics, joint_angles_from_posture, ArmPosture, JointAngles,
    LimbLengths, Point3, UnitVec3, Vec3,
};

/// Distance the desired hand position advances per control step, meters.
pub const LEAD_PER_STEP: f64 = 0.002;
/// Elbow angle above which the stretch stops.
pub const STRAIGHT_ARM_STOP: f64 = 179.0 * std::f64::consts::PI / 180.0;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StiffnessConfig {
    /// Stiffness along the guidance direction, N/m.
    pub k_x: f64,
    /// Damping, N s/m.
    pub damping: f64,
}

impl StiffnessConfig {
    pub fn new(k_x: f64, damping: f64) -> Result<Self> {
        if !(k_x >= 0.0 && damping >= 0.0 && k_x.is_finite() && damping.is_finite()) {
            return Err(Error::InvalidArgument(format!(
                "stiffness and damping must be non-negative, got k_x={k_x}, damping={damping}"
            )));
        }
        Ok(Self { k_x, damping })
    }
}

impl Default for StiffnessConfig {
    /// 200 N/m with critical damping for a 1 kg point mass.
    fn default() -> Self {
        let k_x = 200.0;
        Self {
            k_x,
            damping: 2.0 * k_x.sqrt(),
        }
    }
}

/// Simulated person whose hand is held by the interactive robot.
///
/// The hand moves with velocity `compliance_gain * force + deviation_bias`
/// plus Gaussian position noise. Joint motion follows the least weighted
/// motion under `joint_weights`; `swivel_rate` and `swivel_noise_std` add
/// rotation of the elbow about the shoulder-hand axis, which the hand does
/// not see.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HumanResponseModel {
    /// Hand velocity per unit force, m/(N s).
    pub compliance_gain: f64,
    /// Off-axis drift velocity, m/s.
    pub deviation_bias: Vec3,
    /// Per-step positional noise, m.
    pub noise_std: f64,
    /// Elbow swivel velocity about the shoulder-hand axis, rad/s.
    #[serde(default)]
    pub swivel_rate: f64,
    /// Per-step elbow swivel noise, rad.
    #[serde(default)]
    pub swivel_noise_std: f64,
    /// Redundancy resolution of the person's own joints.
    #[serde(default = "EstimatorWeights::recorded_stretch")]
    pub joint_weights: EstimatorWeights,
}

impl HumanResponseModel {
    pub fn compliant(compliance_gain: f64) -> Self {
        Self {
            compliance_gain,
            deviation_bias: Vec3::zeros(),
            noise_std: 0.0,
            swivel_rate: 0.0,
            swivel_noise_std: 0.0,
            joint_weights: EstimatorWeights::recorded_stretch(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        let finite = self.deviation_bias.iter().all(|v| v.is_finite())
            && self.swivel_rate.is_finite();
        if !(self.compliance_gain >= 0.0
            && self.noise_std >= 0.0
            && self.swivel_noise_std >= 0.0
            && finite)
        {
            return Err(Error::InvalidArgument(
                "human response gains must be finite and non-negative".into(),
            ));
        }
        EstimatorWeights::new(self.joint_weights.q_diag).map(|_| ())
    }

    /// Same person with drift and noise removed.
    pub fn without_perturbation(&self) -> Self {
        Self {
            deviation_bias: Vec3::zeros(),
            noise_std: 0.0,
            swivel_rate: 0.0,
            swivel_noise_std: 0.0,
            ..*self
        }
    }
}

impl Default for HumanResponseModel {
    fn default() -> Self {
        Self::compliant(0.05)
    }
}

/// Direction from the shoulder through the hand.
pub fn optimal_stretch_direction(p: &ArmPosture) -> Result<UnitVec3> {
    let chord = p.hand - p.shoulder;
    if chord.norm() <= 1e-6 {
        return Err(Error::DegeneratePosture("hand coincides with shoulder"));
    }
    Ok(Unit::new_normalize(chord))
}

/// Rotation `G` whose first row is `d'`: it maps global coordinates into a
/// local frame with `x` along the movement direction. Built from the minimal
/// rotation taking the global `x` axis onto `d`.
pub fn stretch_frame(direction: &UnitVec3) -> Matrix3<f64> {
    let r = Rotation3::rotation_between(&Vec3::x(), direction)
        .unwrap_or_else(|| Rotation3::from_axis_angle(&Vec3::z_axis(), std::f64::consts::PI));
    r.matrix().transpose()
}

/// `G' K_local G` with `K_local = diag(k_x, 0, 0)`.
pub fn stiffness_from_frame(frame: &Matrix3<f64>, cfg: &StiffnessConfig) -> Matrix3<f64> {
    let local = Matrix3::from_diagonal(&Vec3::new(cfg.k_x, 0.0, 0.0));
    frame.transpose() * local * frame
}

/// `k_x d d'`.
pub fn global_stiffness(direction: &UnitVec3, cfg: &StiffnessConfig) -> Matrix3<f64> {
    let d = direction.as_ref();
    d * d.transpose() * cfg.k_x
}

/// Task-space force `K (x_d - x) - D v` with zero desired velocity.
pub fn guidance_force(
    stiffness: &Matrix3<f64>,
    cfg: &StiffnessConfig,
    desired: &Point3,
    position: &Point3,
    velocity: &Vec3,
) -> Vec3 {
    stiffness * (desired - position) - velocity * cfg.damping
}

/// Closed-loop stand-in for the interactive robot pulling a simulated hand.
///
/// Damping is applied along the guidance axis only, so motion across it
/// meets no resistance at all. The hand velocity is solved implicitly from
/// `v = c F + bias` with `F = K e - D d d' v`.
#[derive(Debug, Clone)]
pub struct StretchSimulator {
    limbs: LimbLengths,
    stiffness: StiffnessConfig,
    human: HumanResponseModel,
    dt: f64,
    q: JointAngles,
    desired: Point3,
    frozen: bool,
    rng: ChaCha8Rng,
    last_force: Vec3,
}

impl StretchSimulator {
    pub fn new(
        initial: &ArmPosture,
        limbs: LimbLengths,
        stiffness: StiffnessConfig,
        human: HumanResponseModel,
        dt: f64,
        seed: u64,
    ) -> Result<Self> {
        if !(dt > 0.0 && dt.is_finite()) {
            return Err(Error::InvalidArgument(format!("dt must be positive, got {dt}")));
        }
        human.validate()?;
        let q = joint_angles_from_posture(initial, &limbs)?;
        let posture = forward_kinematics(&q, &limbs);
        Ok(Self {
            limbs,
            stiffness,
            human,
            dt,
            q,
            desired: posture.hand,
            frozen: false,
            rng: ChaCha8Rng::seed_from_u64(seed),
            last_force: Vec3::zeros(),
        })
    }

    pub fn posture(&self) -> ArmPosture {
        forward_kinematics(&self.q, &self.limbs)
    }

    pub fn joint_angles(&self) -> &JointAngles {
        &self.q
    }

    pub fn is_frozen(&self) -> bool {
        self.frozen
    }

    /// Force applied at the hand during the last step.
    pub fn last_force(&self) -> &Vec3 {
        &self.last_force
    }

    /// Advances one control step and returns the new ground-truth posture.
    pub fn step(&mut self) -> Result<ArmPosture> {
        let posture = self.posture();
        let hand = posture.hand;
        if !self.frozen && elbow_angle(&posture)? > STRAIGHT_ARM_STOP {
            self.frozen = true;
        }

        let bias = self.human.deviation_bias;
        let c = self.human.compliance_gain;
        let velocity = if self.frozen {
            self.last_force = Vec3::zeros();
            bias
        } else {
            let d = optimal_stretch_direction(&posture)?;
            self.desired += d.as_ref() * LEAD_PER_STEP;
            let k = global_stiffness(&d, &self.stiffness);
            let spring = guidance_force(
                &k,
                &StiffnessConfig::new(self.stiffness.k_x, 0.0)?,
                &self.desired,
                &hand,
                &Vec3::zeros(),
            );
            let along = (c * d.dot(&spring) + d.dot(&bias)) / (1.0 + c * self.stiffness.damping);
            let v = spring * c + bias - d.as_ref() * (c * self.stiffness.damping * along);
            let v_along = d.as_ref() * d.dot(&v);
            self.last_force = guidance_force(&k, &self.stiffness, &self.desired, &hand, &v_along);
            v
        };

        let mut next = hand + velocity * self.dt;
        if self.human.noise_std > 0.0 {
            let normal = Normal::new(0.0, self.human.noise_std)
                .map_err(|e| Error::InvalidArgument(e.to_string()))?;
            next += Vec3::new(
                normal.sample(&mut self.rng),
                normal.sample(&mut self.rng),
                normal.sample(&mut self.rng),
            );
        }
        let next = project_to_reachable(&next, &self.limbs);

        self.q = move_hand_to(&self.q, &next, &self.human.joint_weights, &self.limbs)?;

        let mut swivel = self.human.swivel_rate * self.dt;
        if self.human.swivel_noise_std > 0.0 {
            let normal = Normal::new(0.0, self.human.swivel_noise_std)
                .map_err(|e| Error::InvalidArgument(e.to_string()))?;
            swivel += normal.sample(&mut self.rng);
        }
        if swivel != 0.0 {
            self.q = swivel_elbow(&self.q, swivel, &self.limbs)?;
        }
        Ok(self.posture())
    }
}

/// Rotates the elbow about the shoulder-hand axis. The hand stays put.
pub fn swivel_elbow(q: &JointAngles, angle: f64, limbs: &LimbLengths) -> Result<JointAngles> {
    let p = forward_kinematics(q, limbs);
    let axis = match optimal_stretch_direction(&p) {
        Ok(a) => a,
        Err(_) => return Ok(*q),
    };
    let rot = Rotation3::from_axis_angle(&axis, angle);
    let rotated = ArmPosture::new(rot * p.elbow, p.hand);
    joint_angles_from_posture(&rotated, limbs)
}

/// Clamps a hand position into the shell the arm can reach, keeping a small
/// margin from the fully stretched and fully folded limits.
pub fn project_to_reachable(x: &Point3, limbs: &LimbLengths) -> Point3 {
    let outer = limbs.reach() * (1.0 - 1e-6);
    let inner = (limbs.upper_arm - limbs.forearm).abs() + 1e-6;
    let r = x.norm();
    if r > outer {
        x * (outer / r)
    } else if r < inner && r > 0.0 {
        x * (inner / r)
    } else {
        *x
    }
}

/// Runs the stretch loop for `steps` steps. The returned sequence starts
/// with the initial posture.
pub fn simulate_stretch(
    initial: &ArmPosture,
    limbs: &LimbLengths,
    cfg: &StiffnessConfig,
    human: &HumanResponseModel,
    steps: usize,
    dt: f64,
    seed: u64,
) -> Result<Vec<ArmPosture>> {
    let mut sim = StretchSimulator::new(initial, *limbs, *cfg, *human, dt, seed)?;
    let mut out = Vec::with_capacity(steps + 1);
    out.push(sim.posture());
    for _ in 0..steps {
        out.push(sim.step()?);
    }
    Ok(out)
}
