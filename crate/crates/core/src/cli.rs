//! The `dressing` command.
//!
//! Exit codes: 0 success, 2 unreadable or malformed input, 3 violated
//! domain precondition, 4 numerical failure at run time.

use std::ffi::OsString;
use std::io::Write;
use std::ops::RangeInclusive;
use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand, ValueEnum};

use crate::error::{Error, Result};
use crate::estimator::{compute_weights, EstimatorWeights, Tracker, INITIAL_HAND_TOLERANCE};
use crate::frame::{build_progress_curve, classify_strategy, DEFAULT_ARC_RADIUS};
use crate::geometry::{forward_kinematics, LimbLengths};
use crate::io;
use crate::policy::synth::{expert_corpus, inner_only_corpus};
use crate::policy::{transform_demo, DemonstrationRecord, DressingPolicy, TransformedDemo, DEFAULT_COMPONENTS};
use crate::rollout::{run_rollout, RolloutMode};

pub const EXIT_OK: i32 = 0;
pub const EXIT_PARSE: i32 = 2;
pub const EXIT_PRECONDITION: i32 = 3;
pub const EXIT_RUNTIME: i32 = 4;

/// Exit status for a library error.
pub fn exit_code(e: &Error) -> i32 {
    match e.root() {
        Error::Parse { .. } | Error::Io { .. } => EXIT_PARSE,
        e if e.is_precondition() => EXIT_PRECONDITION,
        _ => EXIT_RUNTIME,
    }
}

#[derive(Debug, Parser)]
#[command(name = "dressing", version, about = "Bimanual robot-assisted dressing tools")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum ModeArg {
    Compliant,
    Noncompliant,
    Static,
}

impl From<ModeArg> for RolloutMode {
    fn from(m: ModeArg) -> Self {
        match m {
            ModeArg::Compliant => RolloutMode::Compliant,
            ModeArg::Noncompliant => RolloutMode::NonCompliant,
            ModeArg::Static => RolloutMode::StaticArm,
        }
    }
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum LimbsArg {
    Mannequin,
    Human1,
    Human2,
}

impl From<LimbsArg> for LimbLengths {
    fn from(l: LimbsArg) -> Self {
        match l {
            LimbsArg::Mannequin => LimbLengths::mannequin(),
            LimbsArg::Human1 => LimbLengths::human_1(),
            LimbsArg::Human2 => LimbLengths::human_2(),
        }
    }
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum CorpusKind {
    Expert,
    InnerOnly,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Joint-motion weights from a recorded stretch.
    FitWeights {
        #[arg(long = "in")]
        input: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Add a small floor so a joint that never moves keeps a finite weight.
        #[arg(long)]
        regularized: bool,
    },
    /// Track the elbow from a hand path.
    Estimate {
        #[arg(long = "in")]
        input: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Weights file; defaults to the recorded-stretch weights.
        #[arg(long)]
        weights: Option<PathBuf>,
        /// Transform applied to every hand sample before tracking.
        #[arg(long)]
        calibration: Option<PathBuf>,
    },
    /// Demonstration to training samples.
    Transform {
        #[arg(long = "in")]
        input: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = DEFAULT_ARC_RADIUS)]
        arc_radius: f64,
    },
    /// Single-demonstration training samples back to a demonstration.
    Untransform {
        #[arg(long = "in")]
        input: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Fit the two policy mixtures.
    Train {
        #[arg(long = "in", required = true, num_args = 1..)]
        inputs: Vec<PathBuf>,
        #[arg(long, default_value_t = DEFAULT_COMPONENTS)]
        k: usize,
        /// Inclusive component range searched by BIC, e.g. `1..6`.
        #[arg(long, value_parser = parse_range, conflicts_with = "k")]
        k_range: Option<RangeInclusive<usize>>,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out_l: PathBuf,
        #[arg(long)]
        out_theta: PathBuf,
    },
    /// Closed-loop dressing simulation.
    Rollout {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        metrics: Option<PathBuf>,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long, value_enum)]
        mode: Option<ModeArg>,
    },
    /// Inner or outer strategy of a demonstration.
    Classify {
        #[arg(long = "in")]
        input: PathBuf,
        #[arg(long, default_value_t = DEFAULT_ARC_RADIUS)]
        arc_radius: f64,
    },
    /// Write the synthetic demonstration corpus.
    Corpus {
        #[arg(long)]
        out_dir: PathBuf,
        #[arg(long, value_enum, default_value = "expert")]
        kind: CorpusKind,
        #[arg(long, value_enum, default_value = "mannequin")]
        limbs: LimbsArg,
        #[arg(long, default_value_t = DEFAULT_ARC_RADIUS)]
        arc_radius: f64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
}

fn parse_range(s: &str) -> std::result::Result<RangeInclusive<usize>, String> {
    let (a, b) = s
        .split_once("..")
        .ok_or_else(|| format!("expected LO..HI, got {s:?}"))?;
    let b = b.strip_prefix('=').unwrap_or(b);
    let lo: usize = a.trim().parse().map_err(|e| format!("{a:?}: {e}"))?;
    let hi: usize = b.trim().parse().map_err(|e| format!("{b:?}: {e}"))?;
    if lo == 0 || lo > hi {
        return Err(format!("range {s:?} must satisfy 1 <= LO <= HI"));
    }
    Ok(lo..=hi)
}

/// Parses arguments, runs one command and returns the exit status.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_PARSE } else { EXIT_OK };
        }
    };
    let stdout = std::io::stdout();
    let mut out = stdout.lock();
    match execute(cli.command, &mut out) {
        Ok(()) => EXIT_OK,
        Err(e) => {
            eprintln!("error: {e}");
            exit_code(&e)
        }
    }
}

fn emit(out: &mut dyn Write, text: &str) -> Result<()> {
    out.write_all(text.as_bytes()).map_err(|e| Error::Io {
        path: "<stdout>".into(),
        message: e.to_string(),
    })
}

/// Runs a parsed command, writing its report to `out`.
pub fn execute(cmd: Command, out: &mut dyn Write) -> Result<()> {
    match cmd {
        Command::FitWeights {
            input,
            out: path,
            regularized,
        } => {
            let traj = io::read_joint_angles(&input)?;
            let w = compute_weights(&traj.angles, regularized)?;
            io::write_weights(&path, &w)?;
            let [a, b, p, g] = w.q_diag;
            emit(out, &format!("q_alpha={a} q_beta={b} q_phi={p} q_gamma={g}\n"))
        }
        Command::Estimate {
            input,
            out: path,
            weights,
            calibration,
        } => {
            let trace = estimate(&input, weights.as_deref(), calibration.as_deref())?;
            io::write_posture_trace(&path, &trace)?;
            emit(out, &format!("rows={}\n", trace.postures.len()))
        }
        Command::Transform {
            input,
            out: path,
            arc_radius,
        } => {
            let demo = io::read_demo(&input)?;
            let t = transform_demo(&demo, arc_radius)?;
            io::write_training(&path, &training_file(&demo, &t, arc_radius))?;
            emit(out, &format!("samples={} l0={} theta0={}\n", t.samples.len(), t.l0, t.theta0))
        }
        Command::Untransform { input, out: path } => {
            let demo = untransform(&input)?;
            io::write_demo(&path, &demo)?;
            emit(out, &format!("points={}\n", demo.gripper_path.len()))
        }
        Command::Train {
            inputs,
            k,
            k_range,
            seed,
            out_l,
            out_theta,
        } => {
            let mut samples = Vec::new();
            for p in &inputs {
                samples.extend(io::read_training(p)?.samples);
            }
            let policy = match k_range {
                Some(range) => DressingPolicy::train_bic(&samples, &range.collect::<Vec<_>>(), seed)?,
                None => DressingPolicy::train(&samples, k, seed)?,
            };
            io::write_policy(&out_l, &out_theta, &policy)?;
            emit(
                out,
                &format!(
                    "k_delta_l={} k_delta_theta={} samples={}\n",
                    policy.delta_l.n_components(),
                    policy.delta_theta.n_components(),
                    samples.len()
                ),
            )
        }
        Command::Rollout {
            config,
            out: path,
            metrics,
            seed,
            mode,
        } => {
            let (mut cfg, files) = io::read_rollout_config(&config)?;
            if let Some(s) = seed {
                cfg.seed = s;
            }
            if let Some(m) = mode {
                cfg.mode = m.into();
            }
            let policy = io::read_policy(&files.delta_l, &files.delta_theta)?;
            let result = run_rollout(&cfg, &policy)?;
            io::rollout_trace_table(&result).write(&path)?;
            let text = io::rollout_metrics(&result);
            if let Some(m) = metrics {
                io::write_atomic(&m, &text)?;
            }
            emit(out, &text)
        }
        Command::Classify { input, arc_radius } => {
            let demo = io::read_demo(&input)?;
            let curve = build_progress_curve(&demo.posture, arc_radius)?;
            let (strategy, distance) = classify_strategy(&demo.gripper_path, &curve)?;
            emit(out, &format!("{strategy} {distance:+.3}\n"))
        }
        Command::Corpus {
            out_dir,
            kind,
            limbs,
            arc_radius,
            seed,
        } => {
            let limbs: LimbLengths = limbs.into();
            let demos = match kind {
                CorpusKind::Expert => expert_corpus(&limbs, arc_radius, seed)?,
                CorpusKind::InnerOnly => inner_only_corpus(&limbs, arc_radius, seed)?,
            };
            std::fs::create_dir_all(&out_dir).map_err(|e| Error::Io {
                path: out_dir.display().to_string(),
                message: e.to_string(),
            })?;
            for (i, d) in demos.iter().enumerate() {
                io::write_demo(&out_dir.join(format!("demo_{i:02}.csv")), d)?;
            }
            emit(out, &format!("demos={}\n", demos.len()))
        }
    }
}

/// Tracks every hand row; errors name the offending row.
pub fn estimate(input: &Path, weights: Option<&Path>, calibration: Option<&Path>) -> Result<io::PostureTrace> {
    let hand = io::read_hand_path(input)?;
    let weights = match weights {
        Some(p) => io::read_weights(p)?,
        None => EstimatorWeights::recorded_stretch(),
    };
    let points = match calibration {
        Some(p) => {
            let t = io::read_calibration(p)?;
            hand.points.iter().map(|x| t.transform_point(x)).collect()
        }
        None => hand.points.clone(),
    };
    let mut tracker = Tracker::new(&hand.initial_posture, hand.limbs, weights)?;
    if let Some(first) = points.first() {
        let offset = (first - hand.initial_posture.hand).norm();
        if offset > INITIAL_HAND_TOLERANCE {
            return Err(Error::InitialHandMismatch { offset });
        }
    }
    let mut angles = Vec::with_capacity(points.len());
    let mut postures = Vec::with_capacity(points.len());
    for (i, p) in points.iter().enumerate() {
        tracker.update(p).map_err(|e| e.at_row(i))?;
        let q = tracker.estimate().q_hat;
        angles.push(q);
        postures.push(forward_kinematics(&q, &hand.limbs));
    }
    Ok(io::PostureTrace {
        limbs: hand.limbs,
        timestamps: hand.timestamps,
        angles,
        postures,
    })
}

fn training_file(demo: &DemonstrationRecord, t: &TransformedDemo, arc_radius: f64) -> io::TrainingFile {
    io::TrainingFile {
        samples: t.samples.clone(),
        reference: Some(io::TransformReference {
            posture: demo.posture,
            arc_radius,
            l0: t.l0,
            theta0: t.theta0,
        }),
        timestamps: Some(demo.timestamps.clone()),
    }
}

/// Inverse of `transform` for a single-demonstration sample file.
pub fn untransform(input: &Path) -> Result<DemonstrationRecord> {
    let src = input.display().to_string();
    let f = io::read_training(input)?;
    let r = f
        .reference
        .ok_or_else(|| Error::parse(&src, 1, "sample file has no single-demonstration reference"))?;
    let timestamps = f
        .timestamps
        .ok_or_else(|| Error::parse(&src, 1, "sample file has no timestamps"))?;
    let curve = build_progress_curve(&r.posture, r.arc_radius)?;
    let normal = crate::geometry::arm_plane_normal(&r.posture, None)?;
    let t = TransformedDemo {
        samples: f.samples,
        l0: r.l0,
        theta0: r.theta0,
        curve,
        normal,
    };
    DemonstrationRecord::new(r.posture, t.to_cartesian()?, timestamps)
}
