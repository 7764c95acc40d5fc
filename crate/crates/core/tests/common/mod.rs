#![allow(dead_code)]

use std::f64::consts::PI;
use std::path::PathBuf;
use std::sync::OnceLock;

use dressing_core::frame::DEFAULT_ARC_RADIUS;
use dressing_core::geometry::{JointAngles, LimbLengths};
use dressing_core::policy::synth::{expert_corpus, inner_only_corpus};
use dressing_core::policy::{transform_demos, DressingPolicy, DEFAULT_COMPONENTS};
use rand::Rng;
use rand_chacha::ChaCha8Rng;

/// Fixture directory, overridable with `DRESSING_FIXTURES`.
pub fn fixtures() -> PathBuf {
    std::env::var_os("DRESSING_FIXTURES")
        .map(PathBuf::from)
        .unwrap_or_else(|| PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("fixtures"))
}

pub fn fixture(name: &str) -> PathBuf {
    fixtures().join(name)
}

/// Joint angles with the elbow bent by at least `min_phi` and the upper
/// arm kept off the shoulder y axis.
pub fn random_angles(rng: &mut ChaCha8Rng, min_phi: f64, max_phi: f64) -> JointAngles {
    JointAngles::new(
        rng.gen_range(-PI..PI),
        rng.gen_range(-1.3..1.3),
        rng.gen_range(min_phi..max_phi),
        rng.gen_range(-PI..PI),
    )
}

pub const CORPUS_SEED: u64 = 7;
pub const TRAIN_SEED: u64 = 0;

pub fn expert_policy() -> &'static DressingPolicy {
    static POLICY: OnceLock<DressingPolicy> = OnceLock::new();
    POLICY.get_or_init(|| {
        let demos = expert_corpus(&LimbLengths::mannequin(), DEFAULT_ARC_RADIUS, CORPUS_SEED).unwrap();
        let samples = transform_demos(&demos, DEFAULT_ARC_RADIUS).unwrap();
        DressingPolicy::train(&samples, DEFAULT_COMPONENTS, TRAIN_SEED).unwrap()
    })
}

pub fn inner_only_policy() -> &'static DressingPolicy {
    static POLICY: OnceLock<DressingPolicy> = OnceLock::new();
    POLICY.get_or_init(|| {
        let demos = inner_only_corpus(&LimbLengths::mannequin(), DEFAULT_ARC_RADIUS, CORPUS_SEED).unwrap();
        let samples = transform_demos(&demos, DEFAULT_ARC_RADIUS).unwrap();
        DressingPolicy::train(&samples, DEFAULT_COMPONENTS, TRAIN_SEED).unwrap()
    })
}
