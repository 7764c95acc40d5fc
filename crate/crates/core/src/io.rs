//! File formats.
//!
//! Tables are comma-separated numbers preceded by a single `# {json}`
//! header line naming the schema, units and columns. Numbers are written
//! with 17 significant digits. Models, configurations and calibrations are
//! JSON documents. Every write goes to a temporary sibling first and is
//! renamed into place.

use std::fs;
use std::path::{Path, PathBuf};

use nalgebra::{DMatrix, DVector, Matrix3};
use serde::{Deserialize, Serialize};
use serde_json::{json, Map, Value};

use crate::error::{Error, Result};
use crate::estimator::EstimatorWeights;
use crate::geometry::{ArmPosture, JointAngles, LimbLengths, Point3, RigidTransform, Vec3};
use crate::policy::{DemonstrationRecord, DressingPolicy, GaussianMixture, InputBounds, TrainingSample};
use crate::rollout::{RolloutConfig, RolloutResult};

pub const FORMAT_VERSION: u64 = 1;

pub mod schema {
    pub const JOINT_ANGLES: &str = "joint-angles";
    pub const WEIGHTS: &str = "weights";
    pub const HAND_PATH: &str = "hand-path";
    pub const POSTURE_TRACE: &str = "posture-trace";
    pub const DEMO: &str = "demo";
    pub const TRAINING: &str = "training-samples";
    pub const MODEL: &str = "gmm";
    pub const ROLLOUT_TRACE: &str = "rollout-trace";
}

/// Formats with 17 significant digits.
pub fn format_number(x: f64) -> String {
    format!("{x:.16e}")
}

fn io_error(path: &Path, e: impl std::fmt::Display) -> Error {
    Error::Io {
        path: path.display().to_string(),
        message: e.to_string(),
    }
}

/// Writes `contents` next to `path` and renames it into place.
pub fn write_atomic(path: &Path, contents: &str) -> Result<()> {
    let name = path
        .file_name()
        .ok_or_else(|| io_error(path, "not a file path"))?
        .to_string_lossy();
    let tmp = path.with_file_name(format!(".{name}.{}.tmp", std::process::id()));
    fs::write(&tmp, contents).map_err(|e| io_error(&tmp, e))?;
    fs::rename(&tmp, path).map_err(|e| {
        let _ = fs::remove_file(&tmp);
        io_error(path, e)
    })
}

pub fn read_text(path: &Path) -> Result<String> {
    fs::read_to_string(path).map_err(|e| io_error(path, e))
}

/// Header plus numeric rows.
#[derive(Debug, Clone, PartialEq)]
pub struct Table {
    pub header: Map<String, Value>,
    pub columns: Vec<String>,
    pub rows: Vec<Vec<f64>>,
}

impl Table {
    pub fn new(schema: &str, columns: &[&str]) -> Self {
        let mut header = Map::new();
        header.insert("schema".into(), json!(schema));
        header.insert("version".into(), json!(FORMAT_VERSION));
        header.insert("frame".into(), json!("shoulder"));
        header.insert("units".into(), json!({"length": "m", "time": "s", "angle": "rad"}));
        Self {
            header,
            columns: columns.iter().map(|c| c.to_string()).collect(),
            rows: Vec::new(),
        }
    }

    pub fn with<T: Serialize>(mut self, key: &str, value: &T) -> Result<Self> {
        let v = serde_json::to_value(value).map_err(|e| Error::InvalidArgument(e.to_string()))?;
        self.header.insert(key.into(), v);
        Ok(self)
    }

    pub fn push(&mut self, row: Vec<f64>) {
        debug_assert_eq!(row.len(), self.columns.len());
        self.rows.push(row);
    }

    pub fn schema(&self) -> Option<&str> {
        self.header.get("schema").and_then(Value::as_str)
    }

    pub fn render(&self) -> String {
        let mut header = self.header.clone();
        header.insert("columns".into(), json!(self.columns));
        let mut out = format!("# {}\n", Value::Object(header));
        for row in &self.rows {
            let cells: Vec<String> = row.iter().map(|x| format_number(*x)).collect();
            out.push_str(&cells.join(","));
            out.push('\n');
        }
        out
    }

    pub fn parse(text: &str, source_name: &str) -> Result<Self> {
        let mut lines = text.lines().enumerate();
        let (_, first) = lines
            .next()
            .ok_or_else(|| Error::parse(source_name, 1, "empty file"))?;
        let json_text = first
            .strip_prefix('#')
            .ok_or_else(|| Error::parse(source_name, 1, "missing '# {...}' header line"))?;
        let mut header: Map<String, Value> = match serde_json::from_str(json_text.trim()) {
            Ok(Value::Object(m)) => m,
            Ok(_) => return Err(Error::parse(source_name, 1, "header is not a JSON object")),
            Err(e) => return Err(Error::parse(source_name, 1, e.to_string())),
        };
        let columns: Vec<String> = match header.remove("columns") {
            Some(v) => serde_json::from_value(v)
                .map_err(|e| Error::parse(source_name, 1, format!("columns: {e}")))?,
            None => return Err(Error::parse(source_name, 1, "header lacks 'columns'")),
        };
        if header.get("schema").and_then(Value::as_str).is_none() {
            return Err(Error::parse(source_name, 1, "header lacks 'schema'"));
        }
        let mut rows = Vec::new();
        for (i, line) in lines {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let row: Vec<f64> = line
                .split(',')
                .map(|c| {
                    c.trim()
                        .parse::<f64>()
                        .ok()
                        .filter(|v| v.is_finite())
                        .ok_or_else(|| Error::parse(source_name, i + 1, format!("bad number {:?}", c.trim())))
                })
                .collect::<Result<_>>()?;
            if row.len() != columns.len() {
                return Err(Error::parse(
                    source_name,
                    i + 1,
                    format!("expected {} values, found {}", columns.len(), row.len()),
                ));
            }
            rows.push(row);
        }
        Ok(Self {
            header,
            columns,
            rows,
        })
    }

    pub fn read(path: &Path) -> Result<Self> {
        Self::parse(&read_text(path)?, &path.display().to_string())
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        write_atomic(path, &self.render())
    }

    /// Checks the schema name and column list.
    pub fn expect(&self, schema: &str, columns: &[&str], source_name: &str) -> Result<()> {
        if self.schema() != Some(schema) {
            return Err(Error::parse(
                source_name,
                1,
                format!("expected schema {schema:?}, found {:?}", self.schema().unwrap_or("")),
            ));
        }
        if self.columns.iter().map(String::as_str).ne(columns.iter().copied()) {
            return Err(Error::parse(
                source_name,
                1,
                format!("expected columns {columns:?}, found {:?}", self.columns),
            ));
        }
        Ok(())
    }

    pub fn header_field<T: for<'de> Deserialize<'de>>(&self, key: &str, source_name: &str) -> Result<T> {
        let v = self
            .header
            .get(key)
            .ok_or_else(|| Error::parse(source_name, 1, format!("header lacks {key:?}")))?;
        serde_json::from_value(v.clone()).map_err(|e| Error::parse(source_name, 1, format!("{key}: {e}")))
    }

    pub fn optional_field<T: for<'de> Deserialize<'de>>(&self, key: &str, source_name: &str) -> Result<Option<T>> {
        match self.header.get(key) {
            None | Some(Value::Null) => Ok(None),
            Some(_) => self.header_field(key, source_name).map(Some),
        }
    }

    /// Strictly increasing first column.
    pub fn check_increasing_time(&self, source_name: &str) -> Result<()> {
        for (i, w) in self.rows.windows(2).enumerate() {
            if !(w[1][0] > w[0][0]) {
                return Err(Error::parse(
                    source_name,
                    i + 3,
                    "timestamps must be strictly increasing",
                ));
            }
        }
        Ok(())
    }
}

fn name(path: &Path) -> String {
    path.display().to_string()
}

const ANGLE_COLUMNS: [&str; 5] = ["t", "alpha", "beta", "phi", "gamma"];

#[derive(Debug, Clone, PartialEq)]
pub struct JointAngleTrajectory {
    pub timestamps: Vec<f64>,
    pub angles: Vec<JointAngles>,
}

pub fn write_joint_angles(path: &Path, traj: &JointAngleTrajectory) -> Result<()> {
    let mut t = Table::new(schema::JOINT_ANGLES, &ANGLE_COLUMNS);
    for (ts, q) in traj.timestamps.iter().zip(&traj.angles) {
        t.push(vec![*ts, q.alpha, q.beta, q.phi, q.gamma]);
    }
    t.write(path)
}

pub fn read_joint_angles(path: &Path) -> Result<JointAngleTrajectory> {
    let src = name(path);
    let t = Table::read(path)?;
    t.expect(schema::JOINT_ANGLES, &ANGLE_COLUMNS, &src)?;
    t.check_increasing_time(&src)?;
    Ok(JointAngleTrajectory {
        timestamps: t.rows.iter().map(|r| r[0]).collect(),
        angles: t
            .rows
            .iter()
            .map(|r| JointAngles {
                alpha: r[1],
                beta: r[2],
                phi: r[3],
                gamma: r[4],
            })
            .collect(),
    })
}

const WEIGHT_COLUMNS: [&str; 4] = ["q_alpha", "q_beta", "q_phi", "q_gamma"];

pub fn write_weights(path: &Path, w: &EstimatorWeights) -> Result<()> {
    let mut t = Table::new(schema::WEIGHTS, &WEIGHT_COLUMNS);
    t.push(w.q_diag.to_vec());
    t.write(path)
}

pub fn read_weights(path: &Path) -> Result<EstimatorWeights> {
    let src = name(path);
    let t = Table::read(path)?;
    t.expect(schema::WEIGHTS, &WEIGHT_COLUMNS, &src)?;
    let [row] = t.rows.as_slice() else {
        return Err(Error::parse(&src, 2, "weights file needs exactly one row"));
    };
    EstimatorWeights::new([row[0], row[1], row[2], row[3]])
}

const POINT_COLUMNS: [&str; 4] = ["t", "x", "y", "z"];

/// Hand samples with the posture they start from.
#[derive(Debug, Clone, PartialEq)]
pub struct HandPath {
    pub limbs: LimbLengths,
    pub initial_posture: ArmPosture,
    pub timestamps: Vec<f64>,
    pub points: Vec<Point3>,
}

pub fn write_hand_path(path: &Path, h: &HandPath) -> Result<()> {
    let mut t = Table::new(schema::HAND_PATH, &POINT_COLUMNS)
        .with("limbs", &h.limbs)?
        .with("initial_posture", &h.initial_posture)?;
    for (ts, p) in h.timestamps.iter().zip(&h.points) {
        t.push(vec![*ts, p.x, p.y, p.z]);
    }
    t.write(path)
}

pub fn read_hand_path(path: &Path) -> Result<HandPath> {
    let src = name(path);
    let t = Table::read(path)?;
    t.expect(schema::HAND_PATH, &POINT_COLUMNS, &src)?;
    t.check_increasing_time(&src)?;
    let limbs: LimbLengths = t.header_field("limbs", &src)?;
    LimbLengths::new(limbs.upper_arm, limbs.forearm)?;
    Ok(HandPath {
        limbs,
        initial_posture: t.header_field("initial_posture", &src)?,
        timestamps: t.rows.iter().map(|r| r[0]).collect(),
        points: t.rows.iter().map(|r| Point3::new(r[1], r[2], r[3])).collect(),
    })
}

const TRACE_COLUMNS: [&str; 11] = [
    "t", "elbow_x", "elbow_y", "elbow_z", "hand_x", "hand_y", "hand_z", "alpha", "beta", "phi", "gamma",
];

/// Estimated postures with their joint angles.
#[derive(Debug, Clone, PartialEq)]
pub struct PostureTrace {
    pub limbs: LimbLengths,
    pub timestamps: Vec<f64>,
    pub angles: Vec<JointAngles>,
    pub postures: Vec<ArmPosture>,
}

pub fn write_posture_trace(path: &Path, trace: &PostureTrace) -> Result<()> {
    let mut t = Table::new(schema::POSTURE_TRACE, &TRACE_COLUMNS).with("limbs", &trace.limbs)?;
    for ((ts, q), p) in trace.timestamps.iter().zip(&trace.angles).zip(&trace.postures) {
        t.push(vec![
            *ts, p.elbow.x, p.elbow.y, p.elbow.z, p.hand.x, p.hand.y, p.hand.z, q.alpha, q.beta, q.phi, q.gamma,
        ]);
    }
    t.write(path)
}

pub fn read_posture_trace(path: &Path) -> Result<PostureTrace> {
    let src = name(path);
    let t = Table::read(path)?;
    t.expect(schema::POSTURE_TRACE, &TRACE_COLUMNS, &src)?;
    Ok(PostureTrace {
        limbs: t.header_field("limbs", &src)?,
        timestamps: t.rows.iter().map(|r| r[0]).collect(),
        postures: t
            .rows
            .iter()
            .map(|r| ArmPosture::new(Point3::new(r[1], r[2], r[3]), Point3::new(r[4], r[5], r[6])))
            .collect(),
        angles: t
            .rows
            .iter()
            .map(|r| JointAngles {
                alpha: r[7],
                beta: r[8],
                phi: r[9],
                gamma: r[10],
            })
            .collect(),
    })
}

pub fn write_demo(path: &Path, demo: &DemonstrationRecord) -> Result<()> {
    let mut t = Table::new(schema::DEMO, &POINT_COLUMNS).with("posture", &demo.posture)?;
    for (ts, p) in demo.timestamps.iter().zip(&demo.gripper_path) {
        t.push(vec![*ts, p.x, p.y, p.z]);
    }
    t.write(path)
}

pub fn read_demo(path: &Path) -> Result<DemonstrationRecord> {
    let src = name(path);
    let t = Table::read(path)?;
    t.expect(schema::DEMO, &POINT_COLUMNS, &src)?;
    t.check_increasing_time(&src)?;
    let posture: ArmPosture = t.header_field("posture", &src)?;
    DemonstrationRecord::new(
        posture,
        t.rows.iter().map(|r| Point3::new(r[1], r[2], r[3])).collect(),
        t.rows.iter().map(|r| r[0]).collect(),
    )
}

/// What a single-demo sample file needs to be mapped back to Cartesian.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TransformReference {
    pub posture: ArmPosture,
    pub arc_radius: f64,
    pub l0: f64,
    pub theta0: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainingFile {
    pub samples: Vec<TrainingSample>,
    /// Present when the file holds exactly one demonstration.
    pub reference: Option<TransformReference>,
    /// Timestamps of the source demonstration, when known.
    pub timestamps: Option<Vec<f64>>,
}

const SAMPLE_COLUMNS: [&str; 4] = ["s", "psi", "delta_l", "delta_theta"];
const TIMED_SAMPLE_COLUMNS: [&str; 5] = ["t", "s", "psi", "delta_l", "delta_theta"];

pub fn write_training(path: &Path, f: &TrainingFile) -> Result<()> {
    let columns: &[&str] = if f.timestamps.is_some() {
        &TIMED_SAMPLE_COLUMNS
    } else {
        &SAMPLE_COLUMNS
    };
    let mut t = Table::new(schema::TRAINING, columns).with("reference", &f.reference)?;
    for (i, s) in f.samples.iter().enumerate() {
        let mut row = Vec::with_capacity(5);
        if let Some(ts) = &f.timestamps {
            row.push(ts[i]);
        }
        row.extend([s.s, s.psi, s.delta_l, s.delta_theta]);
        t.push(row);
    }
    t.write(path)
}

pub fn read_training(path: &Path) -> Result<TrainingFile> {
    let src = name(path);
    let t = Table::read(path)?;
    let timed = t.columns.first().is_some_and(|c| c == "t");
    let columns: &[&str] = if timed { &TIMED_SAMPLE_COLUMNS } else { &SAMPLE_COLUMNS };
    t.expect(schema::TRAINING, columns, &src)?;
    let off = timed as usize;
    let samples = t
        .rows
        .iter()
        .map(|r| TrainingSample {
            s: r[off],
            psi: r[off + 1],
            delta_l: r[off + 2],
            delta_theta: r[off + 3],
        })
        .collect();
    Ok(TrainingFile {
        samples,
        reference: t.optional_field("reference", &src)?,
        timestamps: timed.then(|| t.rows.iter().map(|r| r[0]).collect()),
    })
}

/// Serialized mixture. Covariances are flattened row-major.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelFile {
    pub schema: String,
    pub version: u64,
    /// Name of the regressed output.
    pub output: String,
    pub input_dim: usize,
    pub output_dim: usize,
    pub components: usize,
    pub weights: Vec<f64>,
    pub means: Vec<Vec<f64>>,
    pub covariances: Vec<Vec<f64>>,
    #[serde(default)]
    pub input_bounds: Option<InputBounds>,
}

impl ModelFile {
    pub fn from_mixture(output: &str, g: &GaussianMixture, bounds: Option<InputBounds>) -> Self {
        Self {
            schema: schema::MODEL.into(),
            version: FORMAT_VERSION,
            output: output.into(),
            input_dim: g.input_dim,
            output_dim: g.output_dim,
            components: g.n_components(),
            weights: g.weights.clone(),
            means: g.means.iter().map(|m| m.iter().copied().collect()).collect(),
            covariances: g
                .covariances
                .iter()
                .map(|c| c.transpose().iter().copied().collect())
                .collect(),
            input_bounds: bounds,
        }
    }

    pub fn to_mixture(&self) -> Result<GaussianMixture> {
        let d = self.input_dim + self.output_dim;
        if self.components != self.weights.len() {
            return Err(Error::DimensionMismatch {
                expected: self.components,
                got: self.weights.len(),
            });
        }
        let means = self.means.iter().map(|m| DVector::from_vec(m.clone())).collect();
        let covariances = self
            .covariances
            .iter()
            .map(|c| {
                if c.len() != d * d {
                    return Err(Error::DimensionMismatch {
                        expected: d * d,
                        got: c.len(),
                    });
                }
                Ok(DMatrix::from_row_slice(d, d, c))
            })
            .collect::<Result<_>>()?;
        GaussianMixture::new(self.weights.clone(), means, covariances, self.input_dim, self.output_dim)
    }
}

pub fn write_model(path: &Path, m: &ModelFile) -> Result<()> {
    let text = serde_json::to_string_pretty(m).map_err(|e| io_error(path, e))?;
    write_atomic(path, &(text + "\n"))
}

pub fn read_model(path: &Path) -> Result<ModelFile> {
    let src = name(path);
    let m: ModelFile = serde_json::from_str(&read_text(path)?).map_err(|e| {
        Error::parse(&src, e.line(), e.to_string())
    })?;
    if m.schema != schema::MODEL {
        return Err(Error::parse(&src, 1, format!("expected schema {:?}", schema::MODEL)));
    }
    m.to_mixture()?;
    Ok(m)
}

/// Loads the two mixtures of a policy.
pub fn read_policy(delta_l: &Path, delta_theta: &Path) -> Result<DressingPolicy> {
    let l = read_model(delta_l)?;
    let t = read_model(delta_theta)?;
    DressingPolicy::new(l.to_mixture()?, t.to_mixture()?, l.input_bounds.or(t.input_bounds))
}

pub fn write_policy(delta_l: &Path, delta_theta: &Path, policy: &DressingPolicy) -> Result<()> {
    write_model(delta_l, &ModelFile::from_mixture("delta_l", &policy.delta_l, policy.bounds))?;
    write_model(delta_theta, &ModelFile::from_mixture("delta_theta", &policy.delta_theta, policy.bounds))
}

/// Rotation (row-major) and translation between two robot bases.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CalibrationFile {
    #[serde(rename = "R")]
    pub rotation: [f64; 9],
    pub t: [f64; 3],
}

impl CalibrationFile {
    pub fn to_transform(&self) -> Result<RigidTransform> {
        RigidTransform::new(Matrix3::from_row_slice(&self.rotation), Vec3::from(self.t))
    }
}

pub fn read_calibration(path: &Path) -> Result<RigidTransform> {
    let src = name(path);
    let c: CalibrationFile = serde_json::from_str(&read_text(path)?)
        .map_err(|e| Error::parse(&src, e.line(), e.to_string()))?;
    c.to_transform()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PolicyFiles {
    pub delta_l: PathBuf,
    pub delta_theta: PathBuf,
}

/// Rollout configuration with the policy it runs. Relative model paths
/// resolve against the configuration file's directory.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RolloutFile {
    #[serde(flatten)]
    pub config: RolloutConfig,
    pub policy: PolicyFiles,
}

pub fn read_rollout_config(path: &Path) -> Result<(RolloutConfig, PolicyFiles)> {
    let src = name(path);
    let mut f: RolloutFile = serde_json::from_str(&read_text(path)?)
        .map_err(|e| Error::parse(&src, e.line(), e.to_string()))?;
    let base = path.parent().unwrap_or(Path::new("."));
    for p in [&mut f.policy.delta_l, &mut f.policy.delta_theta] {
        if p.is_relative() {
            *p = base.join(&*p);
        }
    }
    Ok((f.config, f.policy))
}

pub fn write_rollout_config(path: &Path, f: &RolloutFile) -> Result<()> {
    let text = serde_json::to_string_pretty(f).map_err(|e| io_error(path, e))?;
    write_atomic(path, &(text + "\n"))
}

const ROLLOUT_COLUMNS: [&str; 16] = [
    "step",
    "s",
    "gripper_x",
    "gripper_y",
    "gripper_z",
    "hand_x",
    "hand_y",
    "hand_z",
    "elbow_x",
    "elbow_y",
    "elbow_z",
    "elbow_est_x",
    "elbow_est_y",
    "elbow_est_z",
    "elbow_error",
    "clearance",
];

pub fn rollout_trace_table(r: &RolloutResult) -> Table {
    let mut t = Table::new(schema::ROLLOUT_TRACE, &ROLLOUT_COLUMNS);
    for i in 0..r.len() {
        let (g, truth, est) = (r.gripper_path[i], r.true_postures[i], r.estimated_postures[i]);
        t.push(vec![
            i as f64,
            r.s_trace[i],
            g.x,
            g.y,
            g.z,
            truth.hand.x,
            truth.hand.y,
            truth.hand.z,
            truth.elbow.x,
            truth.elbow.y,
            truth.elbow.z,
            est.elbow.x,
            est.elbow.y,
            est.elbow.z,
            r.elbow_error_trace[i],
            r.clearance_trace[i],
        ]);
    }
    t
}

/// `key=value` lines summarizing a rollout.
pub fn rollout_metrics(r: &RolloutResult) -> String {
    let min_clearance = r.clearance_trace.iter().copied().fold(f64::INFINITY, f64::min);
    let mut out = String::new();
    out.push_str(&format!("outcome={}\n", r.outcome));
    out.push_str(&format!("detail={}\n", r.outcome_detail));
    out.push_str(&format!("steps={}\n", r.len()));
    out.push_str(&format!("final_s={}\n", format_number(*r.s_trace.last().unwrap_or(&0.0))));
    out.push_str(&format!(
        "final_shoulder_distance={}\n",
        format_number(r.final_shoulder_distance().unwrap_or(f64::NAN))
    ));
    out.push_str(&format!("min_clearance={}\n", format_number(min_clearance)));
    out.push_str(&format!("max_elbow_error={}\n", format_number(r.max_elbow_error())));
    out.push_str(&format!("extrapolated_steps={}\n", r.extrapolated_steps));
    out.push_str(&format!("clamped_steps={}\n", r.clamped_steps));
    out
}
