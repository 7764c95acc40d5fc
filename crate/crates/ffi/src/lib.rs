//! C interface to `dressing-core`.
//!
//! Every function returns a [`DressingStatus`]. On failure the message of
//! the last error on the calling thread is available from
//! [`dressing_last_error`]. Vectors are `double[3]` arrays, joint angles are
//! `double[4]` in the order alpha, beta, phi, gamma, and matrices are
//! `double[9]` row-major. Positions are in meters in the shoulder frame.
//!
//! Handles are opaque; free them with the matching `_free` function.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::PathBuf;
use std::ptr;

use dressing_core::cli::{exit_code, EXIT_PARSE, EXIT_PRECONDITION};
use dressing_core::estimator::{EstimatorWeights, Tracker};
use dressing_core::frame::{build_progress_curve, from_dressing, to_dressing, DressingCoord};
use dressing_core::geometry::{
    arm_plane_normal, elbow_angle, forward_kinematics, joint_angles_from_posture, ArmPosture, JointAngles,
    LimbLengths, Point3,
};
use dressing_core::policy::DressingPolicy;
use dressing_core::rollout::{run_rollout, Outcome};
use dressing_core::stretch::{global_stiffness, optimal_stretch_direction, StiffnessConfig};
use dressing_core::{io, Error};

/// Result of every call. The numeric values match the `dressing` command's
/// exit codes where the categories overlap.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DressingStatus {
    Ok = 0,
    /// A required pointer argument was null.
    NullPointer = 1,
    /// A file could not be read or parsed.
    Parse = 2,
    /// An argument violated a documented precondition.
    Precondition = 3,
    /// The computation failed numerically.
    Runtime = 4,
    /// An internal panic was caught at the boundary.
    Panic = 5,
}

/// Outcome of a simulated dressing run.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DressingOutcome {
    Success = 0,
    CollisionFailure = 1,
    NoConvergence = 2,
}

/// Recursive elbow tracker.
pub struct DressingTrackerHandle(Tracker);

/// Pair of learned mixtures mapping `(s, psi)` to `(delta_l, delta_theta)`.
pub struct DressingPolicyHandle(DressingPolicy);

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(message: String) {
    let c = CString::new(message.replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(c));
}

fn status_of(e: &Error) -> DressingStatus {
    match exit_code(e) {
        EXIT_PARSE => DressingStatus::Parse,
        EXIT_PRECONDITION => DressingStatus::Precondition,
        _ => DressingStatus::Runtime,
    }
}

enum Failure {
    Null(&'static str),
    Core(Error),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure::Core(e)
    }
}

type Attempt<T> = std::result::Result<T, Failure>;

fn guard(f: impl FnOnce() -> Attempt<()>) -> DressingStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => DressingStatus::Ok,
        Ok(Err(Failure::Null(what))) => {
            set_error(format!("null pointer: {what}"));
            DressingStatus::NullPointer
        }
        Ok(Err(Failure::Core(e))) => {
            set_error(e.to_string());
            status_of(&e)
        }
        Err(_) => {
            set_error("internal panic".into());
            DressingStatus::Panic
        }
    }
}

unsafe fn read<const N: usize>(p: *const f64, what: &'static str) -> Attempt<[f64; N]> {
    if p.is_null() {
        return Err(Failure::Null(what));
    }
    let mut out = [0.0; N];
    out.copy_from_slice(std::slice::from_raw_parts(p, N));
    Ok(out)
}

unsafe fn write<const N: usize>(p: *mut f64, values: [f64; N], what: &'static str) -> Attempt<()> {
    if p.is_null() {
        return Err(Failure::Null(what));
    }
    std::slice::from_raw_parts_mut(p, N).copy_from_slice(&values);
    Ok(())
}

unsafe fn out_ref<'a, T>(p: *mut T, what: &'static str) -> Attempt<&'a mut T> {
    p.as_mut().ok_or(Failure::Null(what))
}

unsafe fn path(p: *const c_char, what: &'static str) -> Attempt<PathBuf> {
    if p.is_null() {
        return Err(Failure::Null(what));
    }
    let s = CStr::from_ptr(p)
        .to_str()
        .map_err(|e| Error::InvalidArgument(format!("{what} is not UTF-8: {e}")))?;
    Ok(PathBuf::from(s))
}

unsafe fn posture(elbow: *const f64, hand: *const f64) -> Attempt<ArmPosture> {
    let e = read::<3>(elbow, "elbow")?;
    let h = read::<3>(hand, "hand")?;
    Ok(ArmPosture::new(Point3::from(e), Point3::from(h)))
}

fn point(p: &Point3) -> [f64; 3] {
    [p.x, p.y, p.z]
}

/// Message of the last failed call on this thread, or null if none. The
/// pointer stays valid until the next failing call on the same thread.
#[no_mangle]
pub extern "C" fn dressing_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |c| c.as_ptr()))
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn dressing_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Elbow and hand positions for joint angles `q`.
///
/// # Safety
/// `q` must point to 4 doubles; `elbow_out` and `hand_out` to 3 each.
#[no_mangle]
pub unsafe extern "C" fn dressing_forward_kinematics(
    q: *const f64,
    upper_arm: f64,
    forearm: f64,
    elbow_out: *mut f64,
    hand_out: *mut f64,
) -> DressingStatus {
    guard(|| {
        let [a, b, p, g] = read::<4>(q, "q")?;
        let limbs = LimbLengths::new(upper_arm, forearm)?;
        let arm = forward_kinematics(&JointAngles::new(a, b, p, g), &limbs);
        write(elbow_out, point(&arm.elbow), "elbow_out")?;
        write(hand_out, point(&arm.hand), "hand_out")
    })
}

/// Joint angles of a posture.
///
/// # Safety
/// `elbow` and `hand` must point to 3 doubles; `q_out` to 4.
#[no_mangle]
pub unsafe extern "C" fn dressing_joint_angles(
    elbow: *const f64,
    hand: *const f64,
    upper_arm: f64,
    forearm: f64,
    q_out: *mut f64,
) -> DressingStatus {
    guard(|| {
        let limbs = LimbLengths::new(upper_arm, forearm)?;
        let q = joint_angles_from_posture(&posture(elbow, hand)?, &limbs)?;
        write(q_out, [q.alpha, q.beta, q.phi, q.gamma], "q_out")
    })
}

/// Interior elbow angle in radians; pi for a straight arm.
///
/// # Safety
/// `elbow` and `hand` must point to 3 doubles.
#[no_mangle]
pub unsafe extern "C" fn dressing_elbow_angle(elbow: *const f64, hand: *const f64, psi_out: *mut f64) -> DressingStatus {
    guard(|| {
        *out_ref(psi_out, "psi_out")? = elbow_angle(&posture(elbow, hand)?)?;
        Ok(())
    })
}

/// Unit stretch direction and the rank-one stiffness `k_x d d'` along it.
/// `stiffness_out` may be null.
///
/// # Safety
/// `elbow`, `hand` and `direction_out` must point to 3 doubles;
/// `stiffness_out`, when not null, to 9.
#[no_mangle]
pub unsafe extern "C" fn dressing_stretch_direction(
    elbow: *const f64,
    hand: *const f64,
    k_x: f64,
    direction_out: *mut f64,
    stiffness_out: *mut f64,
) -> DressingStatus {
    guard(|| {
        let d = optimal_stretch_direction(&posture(elbow, hand)?)?;
        write(direction_out, [d.x, d.y, d.z], "direction_out")?;
        if !stiffness_out.is_null() {
            let k = global_stiffness(&d, &StiffnessConfig::new(k_x, 0.0)?);
            let mut rows = [0.0; 9];
            for r in 0..3 {
                for c in 0..3 {
                    rows[3 * r + c] = k[(r, c)];
                }
            }
            write(stiffness_out, rows, "stiffness_out")?;
        }
        Ok(())
    })
}

/// Cartesian point to `(s, l, theta)` for a posture and elbow arc radius.
///
/// # Safety
/// `elbow`, `hand`, `x` and `coord_out` must point to 3 doubles.
#[no_mangle]
pub unsafe extern "C" fn dressing_to_dressing(
    elbow: *const f64,
    hand: *const f64,
    arc_radius: f64,
    x: *const f64,
    coord_out: *mut f64,
) -> DressingStatus {
    guard(|| {
        let arm = posture(elbow, hand)?;
        let curve = build_progress_curve(&arm, arc_radius)?;
        let v = arm_plane_normal(&arm, None)?;
        let c = to_dressing(&Point3::from(read::<3>(x, "x")?), &curve, &v)?;
        write(coord_out, [c.s, c.l, c.theta], "coord_out")
    })
}

/// `(s, l, theta)` back to a Cartesian point.
///
/// # Safety
/// `elbow`, `hand`, `coord` and `x_out` must point to 3 doubles.
#[no_mangle]
pub unsafe extern "C" fn dressing_from_dressing(
    elbow: *const f64,
    hand: *const f64,
    arc_radius: f64,
    coord: *const f64,
    x_out: *mut f64,
) -> DressingStatus {
    guard(|| {
        let arm = posture(elbow, hand)?;
        let curve = build_progress_curve(&arm, arc_radius)?;
        let v = arm_plane_normal(&arm, None)?;
        let [s, l, theta] = read::<3>(coord, "coord")?;
        let x = from_dressing(&DressingCoord::new(s, l, theta), &curve, &v)?;
        write(x_out, point(&x), "x_out")
    })
}

/// Creates a tracker starting at a known posture. `weights` (4 doubles) may
/// be null for the recorded-stretch defaults.
///
/// # Safety
/// `elbow` and `hand` must point to 3 doubles; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn dressing_tracker_new(
    elbow: *const f64,
    hand: *const f64,
    upper_arm: f64,
    forearm: f64,
    weights: *const f64,
    out: *mut *mut DressingTrackerHandle,
) -> DressingStatus {
    guard(|| {
        let slot = out_ref(out, "out")?;
        *slot = ptr::null_mut();
        let w = if weights.is_null() {
            EstimatorWeights::recorded_stretch()
        } else {
            EstimatorWeights::new(read::<4>(weights, "weights")?)?
        };
        let limbs = LimbLengths::new(upper_arm, forearm)?;
        let tracker = Tracker::new(&posture(elbow, hand)?, limbs, w)?;
        *slot = Box::into_raw(Box::new(DressingTrackerHandle(tracker)));
        Ok(())
    })
}

/// Feeds one hand sample and returns the estimated elbow.
///
/// # Safety
/// `tracker` must come from [`dressing_tracker_new`]; `hand` and
/// `elbow_out` must point to 3 doubles.
#[no_mangle]
pub unsafe extern "C" fn dressing_tracker_update(
    tracker: *mut DressingTrackerHandle,
    hand: *const f64,
    elbow_out: *mut f64,
) -> DressingStatus {
    guard(|| {
        let t = out_ref(tracker, "tracker")?;
        let p = t.0.update(&Point3::from(read::<3>(hand, "hand")?))?;
        write(elbow_out, point(&p.elbow), "elbow_out")
    })
}

/// Current joint-angle estimate.
///
/// # Safety
/// `tracker` must come from [`dressing_tracker_new`]; `q_out` must point
/// to 4 doubles.
#[no_mangle]
pub unsafe extern "C" fn dressing_tracker_angles(tracker: *const DressingTrackerHandle, q_out: *mut f64) -> DressingStatus {
    guard(|| {
        let t = tracker.as_ref().ok_or(Failure::Null("tracker"))?;
        let q = t.0.estimate().q_hat;
        write(q_out, [q.alpha, q.beta, q.phi, q.gamma], "q_out")
    })
}

/// # Safety
/// `tracker` must come from [`dressing_tracker_new`] or be null.
#[no_mangle]
pub unsafe extern "C" fn dressing_tracker_free(tracker: *mut DressingTrackerHandle) {
    if !tracker.is_null() {
        drop(Box::from_raw(tracker));
    }
}

/// Loads a policy from its two model files.
///
/// # Safety
/// Paths must be NUL-terminated UTF-8; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn dressing_policy_load(
    delta_l_path: *const c_char,
    delta_theta_path: *const c_char,
    out: *mut *mut DressingPolicyHandle,
) -> DressingStatus {
    guard(|| {
        let slot = out_ref(out, "out")?;
        *slot = ptr::null_mut();
        let policy = io::read_policy(&path(delta_l_path, "delta_l_path")?, &path(delta_theta_path, "delta_theta_path")?)?;
        *slot = Box::into_raw(Box::new(DressingPolicyHandle(policy)));
        Ok(())
    })
}

/// Regresses `(delta_l, delta_theta)` at progress `s` and elbow angle `psi`.
/// `extrapolated_out` may be null.
///
/// # Safety
/// `policy` must come from [`dressing_policy_load`]; outputs must be
/// writable.
#[no_mangle]
pub unsafe extern "C" fn dressing_policy_query(
    policy: *const DressingPolicyHandle,
    s: f64,
    psi: f64,
    delta_l_out: *mut f64,
    delta_theta_out: *mut f64,
    extrapolated_out: *mut bool,
) -> DressingStatus {
    guard(|| {
        let p = policy.as_ref().ok_or(Failure::Null("policy"))?;
        let o = p.0.query(s, psi)?;
        *out_ref(delta_l_out, "delta_l_out")? = o.delta_l;
        *out_ref(delta_theta_out, "delta_theta_out")? = o.delta_theta;
        if let Some(e) = extrapolated_out.as_mut() {
            *e = o.extrapolated;
        }
        Ok(())
    })
}

/// # Safety
/// `policy` must come from [`dressing_policy_load`] or be null.
#[no_mangle]
pub unsafe extern "C" fn dressing_policy_free(policy: *mut DressingPolicyHandle) {
    if !policy.is_null() {
        drop(Box::from_raw(policy));
    }
}

/// Runs a rollout described by a configuration file and writes its trace.
/// `trace_path` may be null to skip writing.
///
/// # Safety
/// Paths must be NUL-terminated UTF-8 or null where allowed; outputs must
/// be writable.
#[no_mangle]
pub unsafe extern "C" fn dressing_rollout_run(
    config_path: *const c_char,
    trace_path: *const c_char,
    outcome_out: *mut DressingOutcome,
    steps_out: *mut usize,
) -> DressingStatus {
    guard(|| {
        let (cfg, files) = io::read_rollout_config(&path(config_path, "config_path")?)?;
        let policy = io::read_policy(&files.delta_l, &files.delta_theta)?;
        let result = run_rollout(&cfg, &policy)?;
        if !trace_path.is_null() {
            io::rollout_trace_table(&result).write(&path(trace_path, "trace_path")?)?;
        }
        *out_ref(outcome_out, "outcome_out")? = match result.outcome {
            Outcome::Success => DressingOutcome::Success,
            Outcome::CollisionFailure => DressingOutcome::CollisionFailure,
            Outcome::NoConvergence => DressingOutcome::NoConvergence,
        };
        if let Some(s) = steps_out.as_mut() {
            *s = result.len();
        }
        Ok(())
    })
}
