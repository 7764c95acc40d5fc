mod common;

use dressing_core::geometry::{elbow_angle, LimbLengths, Point3};
use dressing_core::policy::synth::demo_posture;
use dressing_core::rollout::{evaluate_success, run_rollout, Outcome, RolloutConfig, RolloutMode, SuccessThresholds};

fn config(deg: f64, mode: RolloutMode) -> RolloutConfig {
    let l = LimbLengths::mannequin();
    RolloutConfig::new(demo_posture(deg.to_radians(), &l).unwrap(), l, mode)
}

#[test]
fn same_seed_same_trace() {
    let mut cfg = config(100.0, RolloutMode::NonCompliant);
    cfg.human.noise_std = 5e-4;
    cfg.seed = 42;
    let a = run_rollout(&cfg, common::expert_policy()).unwrap();
    let b = run_rollout(&cfg, common::expert_policy()).unwrap();
    assert_eq!(a, b);
    cfg.seed = 43;
    let c = run_rollout(&cfg, common::expert_policy()).unwrap();
    assert_ne!(a.true_postures, c.true_postures);
}

#[test]
fn progress_is_monotone_and_takes_ceil_steps() {
    let cfg = config(110.0, RolloutMode::Compliant);
    let r = run_rollout(&cfg, common::expert_policy()).unwrap();
    assert!(r.s_trace.windows(2).all(|w| w[1] >= w[0]));
    let expected = ((cfg.dynamics.s_target - 0.0) / cfg.dynamics.c - 1e-9).ceil() as usize;
    assert_eq!(r.len(), expected + 1);
    assert_eq!(*r.s_trace.last().unwrap(), cfg.dynamics.s_target);
}

#[test]
fn estimated_hand_follows_true_hand() {
    let mut cfg = config(95.0, RolloutMode::NonCompliant);
    cfg.human.swivel_rate = 0.3;
    let r = run_rollout(&cfg, common::expert_policy()).unwrap();
    for (t, e) in r.true_postures.iter().zip(&r.estimated_postures) {
        assert!((t.hand - e.hand).norm() < 1e-6);
    }
}

#[test]
fn compliant_stretch_only_opens_the_elbow() {
    let r = run_rollout(&config(90.0, RolloutMode::Compliant), common::expert_policy()).unwrap();
    let psi: Vec<f64> = r.true_postures.iter().map(|p| elbow_angle(p).unwrap()).collect();
    assert!(psi.windows(2).all(|w| w[1] >= w[0] - 1e-9));
    assert!(psi.last().unwrap() > psi.first().unwrap());
}

#[test]
fn static_arm_never_moves() {
    let r = run_rollout(&config(130.0, RolloutMode::StaticArm), common::expert_policy()).unwrap();
    let first = r.true_postures[0];
    assert!(r.true_postures.iter().all(|p| *p == first));
    assert!(r.max_elbow_error() < 1e-12);
}

#[test]
fn one_step_budget_does_not_converge() {
    let mut cfg = config(120.0, RolloutMode::Compliant);
    cfg.max_steps = 1;
    let r = run_rollout(&cfg, common::expert_policy()).unwrap();
    assert_eq!(r.outcome, Outcome::NoConvergence);
    assert_eq!(r.len(), 2);
}

#[test]
fn invalid_config_is_rejected() {
    let mut cfg = config(120.0, RolloutMode::Compliant);
    cfg.max_steps = 0;
    assert!(run_rollout(&cfg, common::expert_policy()).is_err());
    let mut cfg = config(120.0, RolloutMode::Compliant);
    cfg.dt = -1.0;
    assert!(run_rollout(&cfg, common::expert_policy()).is_err());
}

#[test]
fn success_rules() {
    let l = LimbLengths::mannequin();
    let p = demo_posture(2.0, &l).unwrap();
    let th = SuccessThresholds::default();
    let postures = vec![p; 3];
    let near = p.shoulder + nalgebra::Vector3::new(0.0, 0.03, 0.0);
    let path = vec![p.hand, p.elbow, near];
    let (o, _) = evaluate_success(&[0.0, 0.5, 1.0], &path, &postures, &[0.05, 0.05, 0.03], 1.0, &th);
    assert_eq!(o, Outcome::Success);
    let (o, _) = evaluate_success(&[0.0, 0.5, 1.0], &path, &postures, &[0.05, 0.01, 0.03], 1.0, &th);
    assert_eq!(o, Outcome::CollisionFailure);
    let (o, _) = evaluate_success(&[0.0, 0.5, 0.9], &path, &postures, &[0.05, 0.05, 0.03], 1.0, &th);
    assert_eq!(o, Outcome::NoConvergence);
    let far = vec![p.hand, p.elbow, Point3::new(0.5, 0.5, 0.5)];
    let (o, _) = evaluate_success(&[0.0, 0.5, 1.0], &far, &postures, &[0.05, 0.05, 0.05], 1.0, &th);
    assert_ne!(o, Outcome::Success);
}
