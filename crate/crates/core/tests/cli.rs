mod common;

use std::path::Path;
use std::process::{Command, Output};

use dressing_core::estimator::{track, EstimatorWeights};
use dressing_core::frame::DEFAULT_ARC_RADIUS;
use dressing_core::geometry::{forward_kinematics, JointAngles, LimbLengths, Point3};
use dressing_core::io::{
    read_demo, read_posture_trace, read_training, read_weights, write_demo, write_hand_path, write_rollout_config,
    HandPath, PolicyFiles, RolloutFile,
};
use dressing_core::policy::synth::{demo_posture, expert_corpus};
use dressing_core::rollout::{RolloutConfig, RolloutMode};

fn dressing(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_dressing")).args(args).output().unwrap()
}

fn p(path: &Path) -> &str {
    path.to_str().unwrap()
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn hand_path(extra: Option<Point3>) -> HandPath {
    let l = LimbLengths::mannequin();
    let start = forward_kinematics(&JointAngles::new(0.1, -0.2, 1.3, 0.4), &l);
    let mut points: Vec<Point3> = (1..=30)
        .map(|i| start.hand + nalgebra::Vector3::new(0.002, 0.001, -0.0015) * i as f64)
        .collect();
    points.extend(extra);
    HandPath {
        limbs: l,
        initial_posture: start,
        timestamps: (0..points.len()).map(|i| i as f64 * 0.01).collect(),
        points,
    }
}

#[test]
fn fit_weights_fixtures() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("w.csv");
    let o = dressing(&["fit-weights", "--in", p(&common::fixture("single_step_angles.csv")), "--out", p(&out)]);
    assert_eq!(o.status.code(), Some(0), "{o:?}");
    let w = read_weights(&out).unwrap();
    for (got, want) in w.q_diag.iter().zip([100.0, 400.0, 25.0, 156.25]) {
        assert!((got - want).abs() < 1e-9 * want, "{got} vs {want}");
    }

    let frozen = common::fixture("frozen_joint_angles.csv");
    assert_eq!(dressing(&["fit-weights", "--in", p(&frozen), "--out", p(&out)]).status.code(), Some(3));
    let o = dressing(&["fit-weights", "--in", p(&frozen), "--out", p(&out), "--regularized"]);
    assert_eq!(o.status.code(), Some(0));

    let malformed = common::fixture("malformed_angles.csv");
    let o = dressing(&["fit-weights", "--in", p(&malformed), "--out", p(&out)]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains('3'));
}

#[test]
fn bad_arguments_exit_2() {
    assert_eq!(dressing(&["fit-weights"]).status.code(), Some(2));
    assert_eq!(dressing(&["no-such-command"]).status.code(), Some(2));
    assert_eq!(dressing(&["--help"]).status.code(), Some(0));
}

#[test]
fn estimate_matches_library() {
    let dir = tempfile::tempdir().unwrap();
    let input = dir.path().join("hand.csv");
    let out = dir.path().join("trace.csv");
    let h = hand_path(None);
    write_hand_path(&input, &h).unwrap();
    let o = dressing(&["estimate", "--in", p(&input), "--out", p(&out)]);
    assert_eq!(o.status.code(), Some(0), "{o:?}");
    let trace = read_posture_trace(&out).unwrap();
    let expected = track(&h.initial_posture, &h.points, &h.limbs, &EstimatorWeights::recorded_stretch()).unwrap();
    assert_eq!(trace.postures, expected);

    let o = dressing(&[
        "estimate",
        "--in",
        p(&input),
        "--out",
        p(&out),
        "--weights",
        p(&common::fixture("recorded_weights.csv")),
        "--calibration",
        p(&common::fixture("calibration_identity.json")),
    ]);
    assert_eq!(o.status.code(), Some(0));
    assert_eq!(read_posture_trace(&out).unwrap().postures, expected);

    let o = dressing(&[
        "estimate",
        "--in",
        p(&input),
        "--out",
        p(&out),
        "--calibration",
        p(&common::fixture("calibration_bad.json")),
    ]);
    assert_eq!(o.status.code(), Some(3));
}

#[test]
fn unreachable_hand_names_the_row() {
    let dir = tempfile::tempdir().unwrap();
    let input = dir.path().join("hand.csv");
    write_hand_path(&input, &hand_path(Some(Point3::new(1.0, 1.0, 1.0)))).unwrap();
    let o = dressing(&["estimate", "--in", p(&input), "--out", p(&dir.path().join("t.csv"))]);
    assert_eq!(o.status.code(), Some(4));
    assert!(String::from_utf8_lossy(&o.stderr).contains("30"), "{o:?}");
}

#[test]
fn classify_fixtures() {
    let o = dressing(&["classify", "--in", p(&common::fixture("demo_outer.csv"))]);
    assert_eq!(stdout(&o).trim(), "Outer -0.100");
    let o = dressing(&["classify", "--in", p(&common::fixture("demo_inner.csv"))]);
    assert_eq!(stdout(&o).trim(), "Inner +0.100");
    assert_eq!(dressing(&["classify", "--in", p(&common::fixture("demo_short.csv"))]).status.code(), Some(3));
    assert_eq!(
        dressing(&["classify", "--in", p(&common::fixture("demo_no_posture.csv"))]).status.code(),
        Some(2)
    );
    assert_eq!(dressing(&["classify", "--in", "/nonexistent.csv"]).status.code(), Some(2));
}

#[test]
fn transform_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let demo = expert_corpus(&LimbLengths::mannequin(), DEFAULT_ARC_RADIUS, 3).unwrap().remove(6);
    let (src, samples, back) = (dir.path().join("d.csv"), dir.path().join("s.csv"), dir.path().join("b.csv"));
    write_demo(&src, &demo).unwrap();
    assert_eq!(dressing(&["transform", "--in", p(&src), "--out", p(&samples)]).status.code(), Some(0));
    let f = read_training(&samples).unwrap();
    assert_eq!(f.samples[0].delta_l, 0.0);
    assert_eq!(dressing(&["untransform", "--in", p(&samples), "--out", p(&back)]).status.code(), Some(0));
    let restored = read_demo(&back).unwrap();
    assert_eq!(restored.timestamps, demo.timestamps);
    for (a, b) in restored.gripper_path.iter().zip(&demo.gripper_path) {
        assert!((a - b).norm() < 1e-9);
    }
}

#[test]
fn corpus_train_and_rollout() {
    let dir = tempfile::tempdir().unwrap();
    let corpus = dir.path().join("corpus");
    let o = dressing(&["corpus", "--out-dir", p(&corpus), "--seed", "7"]);
    assert_eq!(stdout(&o).trim(), "demos=10");

    let mut samples = Vec::new();
    for i in 0..10 {
        let out = dir.path().join(format!("s{i}.csv"));
        let demo = corpus.join(format!("demo_{i:02}.csv"));
        assert_eq!(dressing(&["transform", "--in", p(&demo), "--out", p(&out)]).status.code(), Some(0));
        samples.push(out);
    }
    let (ml, mt) = (dir.path().join("l.json"), dir.path().join("t.json"));
    let mut args = vec!["train", "--k", "8", "--seed", "0", "--out-l", p(&ml), "--out-theta", p(&mt), "--in"];
    args.extend(samples.iter().map(|s| p(s)));
    let o = dressing(&args);
    assert_eq!(o.status.code(), Some(0), "{o:?}");
    assert!(stdout(&o).starts_with("k_delta_l=8 k_delta_theta=8"));

    let l = LimbLengths::mannequin();
    let cfg = dir.path().join("rollout.json");
    write_rollout_config(
        &cfg,
        &RolloutFile {
            config: RolloutConfig::new(demo_posture(120f64.to_radians(), &l).unwrap(), l, RolloutMode::Compliant),
            policy: PolicyFiles {
                delta_l: "l.json".into(),
                delta_theta: "t.json".into(),
            },
        },
    )
    .unwrap();
    let (t1, t2, m) = (dir.path().join("r1.csv"), dir.path().join("r2.csv"), dir.path().join("m.txt"));
    let o = dressing(&["rollout", "--config", p(&cfg), "--out", p(&t1), "--metrics", p(&m)]);
    assert_eq!(o.status.code(), Some(0), "{o:?}");
    assert!(std::fs::read_to_string(&m).unwrap().starts_with("outcome=Success\n"));
    assert_eq!(dressing(&["rollout", "--config", p(&cfg), "--out", p(&t2)]).status.code(), Some(0));
    assert_eq!(std::fs::read(&t1).unwrap(), std::fs::read(&t2).unwrap());

    let o = dressing(&["rollout", "--config", p(&cfg), "--out", p(&t2), "--mode", "static"]);
    assert_eq!(o.status.code(), Some(0));
    assert!(!stdout(&o).is_empty());
}

#[test]
fn train_with_bic_range() {
    let dir = tempfile::tempdir().unwrap();
    let demos = expert_corpus(&LimbLengths::mannequin(), DEFAULT_ARC_RADIUS, 7).unwrap();
    let mut inputs = Vec::new();
    for (i, d) in demos.iter().enumerate().take(4) {
        let (src, out) = (dir.path().join(format!("d{i}.csv")), dir.path().join(format!("s{i}.csv")));
        write_demo(&src, d).unwrap();
        assert_eq!(dressing(&["transform", "--in", p(&src), "--out", p(&out)]).status.code(), Some(0));
        inputs.push(out);
    }
    let (ml, mt) = (dir.path().join("l.json"), dir.path().join("t.json"));
    let mut args = vec!["train", "--k-range", "1..3", "--out-l", p(&ml), "--out-theta", p(&mt), "--in"];
    args.extend(inputs.iter().map(|s| p(s)));
    let o = dressing(&args);
    assert_eq!(o.status.code(), Some(0), "{o:?}");
    let text = stdout(&o);
    let k: Vec<usize> = text
        .split_whitespace()
        .take(2)
        .map(|kv| kv.split_once('=').unwrap().1.parse().unwrap())
        .collect();
    assert!(k.iter().all(|k| (1..=3).contains(k)), "{text}");

    let mut bad = vec!["train", "--k-range", "3..1", "--out-l", p(&ml), "--out-theta", p(&mt), "--in"];
    bad.push(p(&inputs[0]));
    assert_eq!(dressing(&bad).status.code(), Some(2));
}
