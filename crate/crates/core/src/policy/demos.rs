//! Demonstrations and their conversion into training samples.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::frame::{build_progress_curve, from_dressing, to_dressing, DressingCoord, ProgressCurve};
use crate::geometry::{arm_plane_normal, elbow_angle, wrap_angle, ArmPosture, Point3, UnitVec3};

/// A recorded dressing path for a static arm posture.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DemonstrationRecord {
    pub posture: ArmPosture,
    pub gripper_path: Vec<Point3>,
    pub timestamps: Vec<f64>,
}

impl DemonstrationRecord {
    pub fn new(posture: ArmPosture, gripper_path: Vec<Point3>, timestamps: Vec<f64>) -> Result<Self> {
        let d = Self {
            posture,
            gripper_path,
            timestamps,
        };
        d.validate()?;
        Ok(d)
    }

    pub fn validate(&self) -> Result<()> {
        if self.gripper_path.len() < 2 {
            return Err(Error::InsufficientData {
                got: self.gripper_path.len(),
                need: 2,
            });
        }
        if self.timestamps.len() != self.gripper_path.len() {
            return Err(Error::DimensionMismatch {
                expected: self.gripper_path.len(),
                got: self.timestamps.len(),
            });
        }
        if self.timestamps.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(Error::InvalidArgument(
                "demonstration timestamps must be strictly increasing".into(),
            ));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrainingSample {
    pub s: f64,
    pub psi: f64,
    pub delta_l: f64,
    pub delta_theta: f64,
}

/// One demonstration in the dressing coordinate, with the start reference
/// the deltas are taken against.
#[derive(Debug, Clone, PartialEq)]
pub struct TransformedDemo {
    pub samples: Vec<TrainingSample>,
    pub l0: f64,
    pub theta0: f64,
    pub curve: ProgressCurve,
    pub normal: UnitVec3,
}

impl TransformedDemo {
    /// Maps the samples back to Cartesian points.
    pub fn to_cartesian(&self) -> Result<Vec<Point3>> {
        self.samples
            .iter()
            .map(|t| {
                let dc = DressingCoord::new(t.s, self.l0 + t.delta_l, self.theta0 + t.delta_theta);
                from_dressing(&dc, &self.curve, &self.normal)
            })
            .collect()
    }
}

/// Converts one demonstration. `theta` is unwrapped along the path so the
/// deltas never jump by a full turn.
pub fn transform_demo(demo: &DemonstrationRecord, radius: f64) -> Result<TransformedDemo> {
    demo.validate()?;
    let curve = build_progress_curve(&demo.posture, radius)?;
    let normal = arm_plane_normal(&demo.posture, None)?;
    let psi = elbow_angle(&demo.posture)?;
    let coords: Vec<DressingCoord> = demo
        .gripper_path
        .iter()
        .map(|x| to_dressing(x, &curve, &normal))
        .collect::<Result<_>>()?;

    let l0 = coords[0].l;
    let theta0 = coords[0].theta;
    let mut theta = theta0;
    let mut previous = theta0;
    let samples = coords
        .iter()
        .map(|c| {
            theta += wrap_angle(c.theta - previous);
            previous = c.theta;
            TrainingSample {
                s: c.s,
                psi,
                delta_l: c.l - l0,
                delta_theta: theta - theta0,
            }
        })
        .collect();
    Ok(TransformedDemo {
        samples,
        l0,
        theta0,
        curve,
        normal,
    })
}

/// Converts and concatenates all demonstrations.
pub fn transform_demos(demos: &[DemonstrationRecord], radius: f64) -> Result<Vec<TrainingSample>> {
    let mut out = Vec::new();
    for demo in demos {
        out.extend(transform_demo(demo, radius)?.samples);
    }
    Ok(out)
}
