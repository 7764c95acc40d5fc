//! Dressing policies learned from demonstrations.
//!
//! Two mixtures share the inputs `(s, psi)`: one regresses the change in
//! distance to the arm `delta_l`, the other the change in angle around it
//! `delta_theta`, both relative to the start of the path.

pub mod demos;
pub mod gmm;
pub mod gmr;
pub mod progress;
pub mod synth;

use nalgebra::DVector;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::frame::{from_dressing, DressingCoord, ProgressCurve};
use crate::geometry::{Point3, UnitVec3};

pub use demos::{transform_demo, transform_demos, DemonstrationRecord, TrainingSample, TransformedDemo};
pub use gmm::{bic, fit_gmm, fit_gmm_with, select_k_bic, FitOptions, FitReport, GaussianMixture};
pub use gmr::{gmr_condition, Conditional};
pub use progress::{step_progress, ProgressDynamics};

/// Mixture components used when no count is requested.
pub const DEFAULT_COMPONENTS: usize = 8;

/// Axis-aligned box of the training inputs.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct InputBounds {
    pub s: (f64, f64),
    pub psi: (f64, f64),
}

impl InputBounds {
    pub fn of(samples: &[TrainingSample]) -> Self {
        let span = |f: fn(&TrainingSample) -> f64| {
            samples
                .iter()
                .map(f)
                .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), x| (lo.min(x), hi.max(x)))
        };
        Self {
            s: span(|t| t.s),
            psi: span(|t| t.psi),
        }
    }

    pub fn contains(&self, s: f64, psi: f64) -> bool {
        (self.s.0..=self.s.1).contains(&s) && (self.psi.0..=self.psi.1).contains(&psi)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DressingPolicy {
    pub delta_l: GaussianMixture,
    pub delta_theta: GaussianMixture,
    pub bounds: Option<InputBounds>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PolicyOutput {
    pub delta_l: f64,
    pub delta_theta: f64,
    /// The query lies outside the training input box.
    pub extrapolated: bool,
}

fn columns(samples: &[TrainingSample], output: fn(&TrainingSample) -> f64) -> Vec<DVector<f64>> {
    samples
        .iter()
        .map(|t| DVector::from_vec(vec![t.s, t.psi, output(t)]))
        .collect()
}

impl DressingPolicy {
    pub fn new(delta_l: GaussianMixture, delta_theta: GaussianMixture, bounds: Option<InputBounds>) -> Result<Self> {
        for g in [&delta_l, &delta_theta] {
            if g.input_dim != 2 || g.output_dim != 1 {
                return Err(Error::DimensionMismatch {
                    expected: 3,
                    got: g.dim(),
                });
            }
        }
        Ok(Self {
            delta_l,
            delta_theta,
            bounds,
        })
    }

    /// Fits both mixtures with `k` components each.
    pub fn train(samples: &[TrainingSample], k: usize, seed: u64) -> Result<Self> {
        let delta_l = fit_gmm(&columns(samples, |t| t.delta_l), k, 2, seed)?;
        let delta_theta = fit_gmm(&columns(samples, |t| t.delta_theta), k, 2, seed)?;
        Self::new(delta_l, delta_theta, Some(InputBounds::of(samples)))
    }

    /// Picks each mixture's component count by BIC, then fits.
    pub fn train_bic(samples: &[TrainingSample], k_range: &[usize], seed: u64) -> Result<Self> {
        let data_l = columns(samples, |t| t.delta_l);
        let data_t = columns(samples, |t| t.delta_theta);
        let k_l = select_k_bic(&data_l, k_range, 2, seed)?;
        let k_t = select_k_bic(&data_t, k_range, 2, seed)?;
        Self::new(
            fit_gmm(&data_l, k_l, 2, seed)?,
            fit_gmm(&data_t, k_t, 2, seed)?,
            Some(InputBounds::of(samples)),
        )
    }

    /// GMR means of both outputs at `(s, psi)`.
    pub fn query(&self, s: f64, psi: f64) -> Result<PolicyOutput> {
        let x = DVector::from_vec(vec![s, psi]);
        let dl = gmr_condition(&self.delta_l, &x)?.mean[0];
        let dt = gmr_condition(&self.delta_theta, &x)?.mean[0];
        Ok(PolicyOutput {
            delta_l: dl,
            delta_theta: dt,
            extrapolated: self.bounds.is_some_and(|b| !b.contains(s, psi)),
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Waypoint {
    pub point: Point3,
    pub coord: DressingCoord,
    pub extrapolated: bool,
    /// The regressed distance was negative and clamped onto the curve.
    pub radius_clamped: bool,
}

/// Next gripper target for progress `s` on an arm with elbow angle `psi`.
pub fn generate_waypoint(
    policy: &DressingPolicy,
    s: f64,
    psi: f64,
    start_ref: (f64, f64),
    curve: &ProgressCurve,
    v: &UnitVec3,
) -> Result<Waypoint> {
    if !(0.0..=1.0).contains(&s) {
        return Err(Error::OutOfRange(s));
    }
    let out = policy.query(s, psi)?;
    let l = start_ref.0 + out.delta_l;
    let radius_clamped = l < 0.0;
    let coord = DressingCoord::new(s, l.max(0.0), start_ref.1 + out.delta_theta);
    Ok(Waypoint {
        point: from_dressing(&coord, curve, v)?,
        coord,
        extrapolated: out.extrapolated,
        radius_clamped,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::frame::{build_progress_curve, locate, DEFAULT_ARC_RADIUS};
    use crate::geometry::{arm_plane_normal, ArmPosture};

    fn flat_samples(dl: f64) -> Vec<TrainingSample> {
        let mut out = Vec::new();
        for i in 0..60 {
            for psi in [1.5, 2.0, 2.5] {
                out.push(TrainingSample {
                    s: i as f64 / 59.0,
                    psi: psi + 1e-3 * ((i * 7) % 5) as f64,
                    delta_l: dl + 1e-6 * ((i * 3) % 7) as f64,
                    delta_theta: 1e-6 * ((i * 5) % 3) as f64,
                });
            }
        }
        out
    }

    #[test]
    fn constant_policy_keeps_radius() {
        let policy = DressingPolicy::train(&flat_samples(0.02), 3, 0).unwrap();
        let p = ArmPosture::new(Point3::new(0.0, 0.0, -0.25), Point3::new(0.25, 0.0, -0.25));
        let curve = build_progress_curve(&p, DEFAULT_ARC_RADIUS).unwrap();
        let v = arm_plane_normal(&p, None).unwrap();
        for i in 0..=10 {
            let s = i as f64 / 10.0;
            let w = generate_waypoint(&policy, s, 2.0, (0.08, 4.0), &curve, &v).unwrap();
            assert!(!w.extrapolated);
            let back = locate(&w.point, &curve, &v).unwrap();
            assert!((back.coord.l - 0.10).abs() < 1e-3, "s {s}: {}", back.coord.l);
        }
    }

    #[test]
    fn negative_radius_is_clamped() {
        let policy = DressingPolicy::train(&flat_samples(-0.2), 3, 0).unwrap();
        let p = ArmPosture::new(Point3::new(0.0, 0.0, -0.25), Point3::new(0.25, 0.0, -0.25));
        let curve = build_progress_curve(&p, DEFAULT_ARC_RADIUS).unwrap();
        let v = arm_plane_normal(&p, None).unwrap();
        let w = generate_waypoint(&policy, 0.3, 2.0, (0.05, 0.0), &curve, &v).unwrap();
        assert!(w.radius_clamped);
        assert_eq!(w.coord.l, 0.0);
        assert!((w.point - curve.point_at(0.3 * curve.total_length).0).norm() < 1e-12);
    }

    #[test]
    fn flags_extrapolation() {
        let policy = DressingPolicy::train(&flat_samples(0.0), 2, 0).unwrap();
        assert!(policy.query(0.5, 0.5).unwrap().extrapolated);
        assert!(!policy.query(0.5, 2.0).unwrap().extrapolated);
    }
}
