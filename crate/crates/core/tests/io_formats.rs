mod common;

use dressing_core::estimator::EstimatorWeights;
use dressing_core::frame::DEFAULT_ARC_RADIUS;
use dressing_core::geometry::{forward_kinematics, JointAngles, LimbLengths};
use dressing_core::io::{
    read_demo, read_hand_path, read_joint_angles, read_model, read_policy, read_rollout_config, read_training,
    read_weights, write_demo, write_hand_path, write_joint_angles, write_model, write_policy, write_rollout_config,
    write_training, write_weights, HandPath, JointAngleTrajectory, ModelFile, PolicyFiles, RolloutFile, Table,
    TrainingFile, TransformReference,
};
use dressing_core::policy::synth::{demo_posture, expert_corpus};
use dressing_core::policy::{transform_demo, TrainingSample};
use dressing_core::rollout::{RolloutConfig, RolloutMode};
use dressing_core::Error;

#[test]
fn joint_angles_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("q.csv");
    let traj = JointAngleTrajectory {
        timestamps: vec![0.0, 0.1, 0.2],
        angles: vec![
            JointAngles::new(0.1, 0.2, 1.0, 0.3),
            JointAngles::new(0.1 + 1.0 / 3.0, -0.2, 1.1, 0.3),
            JointAngles::new(-3.0, 0.2, 2.0, 1e-17),
        ],
    };
    write_joint_angles(&path, &traj).unwrap();
    assert_eq!(read_joint_angles(&path).unwrap(), traj);
}

#[test]
fn weights_round_trip_and_fixture() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("w.csv");
    let w = EstimatorWeights::new([1.0 / 3.0, 2.0, 3.0, 4.5]).unwrap();
    write_weights(&path, &w).unwrap();
    assert_eq!(read_weights(&path).unwrap(), w);
    assert_eq!(read_weights(&common::fixture("recorded_weights.csv")).unwrap(), EstimatorWeights::recorded_stretch());
}

#[test]
fn hand_path_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("hand.csv");
    let l = LimbLengths::human_1();
    let p = forward_kinematics(&JointAngles::new(0.1, 0.2, 1.2, -0.4), &l);
    let h = HandPath {
        limbs: l,
        initial_posture: p,
        timestamps: vec![0.0, 0.01],
        points: vec![p.hand, p.hand + nalgebra::Vector3::new(1e-3, 0.0, 0.0)],
    };
    write_hand_path(&path, &h).unwrap();
    assert_eq!(read_hand_path(&path).unwrap(), h);
}

#[test]
fn demo_and_training_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let demo = expert_corpus(&LimbLengths::mannequin(), DEFAULT_ARC_RADIUS, 1).unwrap().remove(3);
    let demo_path = dir.path().join("demo.csv");
    write_demo(&demo_path, &demo).unwrap();
    assert_eq!(read_demo(&demo_path).unwrap(), demo);

    let t = transform_demo(&demo, DEFAULT_ARC_RADIUS).unwrap();
    let f = TrainingFile {
        samples: t.samples.clone(),
        reference: Some(TransformReference {
            posture: demo.posture,
            arc_radius: DEFAULT_ARC_RADIUS,
            l0: t.l0,
            theta0: t.theta0,
        }),
        timestamps: Some(demo.timestamps.clone()),
    };
    let path = dir.path().join("train.csv");
    write_training(&path, &f).unwrap();
    assert_eq!(read_training(&path).unwrap(), f);

    let bare = TrainingFile {
        samples: vec![TrainingSample {
            s: 0.5,
            psi: 1.0,
            delta_l: -0.01,
            delta_theta: 0.2,
        }],
        reference: None,
        timestamps: None,
    };
    write_training(&path, &bare).unwrap();
    assert_eq!(read_training(&path).unwrap(), bare);
}

#[test]
fn models_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let policy = common::expert_policy();
    let (l, th) = (dir.path().join("l.json"), dir.path().join("theta.json"));
    write_policy(&l, &th, policy).unwrap();
    let back = read_policy(&l, &th).unwrap();
    assert_eq!(&back, policy);
    for (s, psi) in [(0.1, 1.5), (0.5, 2.5), (0.9, 3.0)] {
        assert_eq!(back.query(s, psi).unwrap(), policy.query(s, psi).unwrap());
    }

    let m: ModelFile = read_model(&l).unwrap();
    let again = dir.path().join("again.json");
    write_model(&again, &m).unwrap();
    assert_eq!(std::fs::read(&l).unwrap(), std::fs::read(&again).unwrap());
}

#[test]
fn rollout_config_resolves_relative_models() {
    let dir = tempfile::tempdir().unwrap();
    let l = LimbLengths::mannequin();
    let f = RolloutFile {
        config: RolloutConfig::new(demo_posture(2.0, &l).unwrap(), l, RolloutMode::Compliant),
        policy: PolicyFiles {
            delta_l: "l.json".into(),
            delta_theta: "/abs/theta.json".into(),
        },
    };
    let path = dir.path().join("rollout.json");
    write_rollout_config(&path, &f).unwrap();
    let (cfg, files) = read_rollout_config(&path).unwrap();
    assert_eq!(cfg, f.config);
    assert_eq!(files.delta_l, dir.path().join("l.json"));
    assert_eq!(files.delta_theta, std::path::PathBuf::from("/abs/theta.json"));
}

#[test]
fn minimal_rollout_config_uses_defaults() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("rollout.json");
    std::fs::write(
        &path,
        r#"{"initial_posture":{"shoulder":[0,0,0],"elbow":[0,0,-0.25],"hand":[0.25,0,-0.25]},
            "limbs":{"upper_arm":0.25,"forearm":0.25},"mode":"static",
            "policy":{"delta_l":"l.json","delta_theta":"t.json"}}"#,
    )
    .unwrap();
    let (cfg, _) = read_rollout_config(&path).unwrap();
    assert_eq!(cfg.mode, RolloutMode::StaticArm);
    assert_eq!(cfg.max_steps, dressing_core::rollout::DEFAULT_MAX_STEPS);
}

#[test]
fn malformed_rows_name_the_line() {
    let err = read_joint_angles(&common::fixture("malformed_angles.csv")).unwrap_err();
    match err {
        Error::Parse { line, .. } => assert_eq!(line, 3),
        e => panic!("unexpected {e:?}"),
    }
}

#[test]
fn header_is_required() {
    assert!(matches!(
        read_demo(&common::fixture("demo_no_posture.csv")),
        Err(Error::Parse { .. })
    ));
    assert!(matches!(Table::parse("1,2,3\n", "mem"), Err(Error::Parse { .. })));
    assert!(matches!(
        read_demo(std::path::Path::new("/nonexistent/demo.csv")),
        Err(Error::Io { .. })
    ));
}

#[test]
fn writes_leave_no_temporaries() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("w.csv");
    write_weights(&path, &EstimatorWeights::identity()).unwrap();
    let names: Vec<_> = std::fs::read_dir(dir.path()).unwrap().map(|e| e.unwrap().file_name()).collect();
    assert_eq!(names, vec![std::ffi::OsString::from("w.csv")]);
}
