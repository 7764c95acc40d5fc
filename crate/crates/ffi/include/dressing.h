#ifndef DRESSING_H
#define DRESSING_H

/* Generated by cbindgen from crates/ffi/src/lib.rs. Do not edit. */

#include <stdbool.h>
#include <stddef.h>

/**
 * Outcome of a simulated dressing run.
 */
typedef enum DressingOutcome {
  DRESSING_OUTCOME_SUCCESS = 0,
  DRESSING_OUTCOME_COLLISION_FAILURE = 1,
  DRESSING_OUTCOME_NO_CONVERGENCE = 2,
} DressingOutcome;

/**
 * Result of every call. The numeric values match the `dressing` command's
 * exit codes where the categories overlap.
 */
typedef enum DressingStatus {
  DRESSING_STATUS_OK = 0,
  /**
   * A required pointer argument was null.
   */
  DRESSING_STATUS_NULL_POINTER = 1,
  /**
   * A file could not be read or parsed.
   */
  DRESSING_STATUS_PARSE = 2,
  /**
   * An argument violated a documented precondition.
   */
  DRESSING_STATUS_PRECONDITION = 3,
  /**
   * The computation failed numerically.
   */
  DRESSING_STATUS_RUNTIME = 4,
  /**
   * An internal panic was caught at the boundary.
   */
  DRESSING_STATUS_PANIC = 5,
} DressingStatus;

/**
 * Pair of learned mixtures mapping `(s, psi)` to `(delta_l, delta_theta)`.
 */
typedef struct DressingPolicyHandle DressingPolicyHandle;

/**
 * Recursive elbow tracker.
 */
typedef struct DressingTrackerHandle DressingTrackerHandle;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message of the last failed call on this thread, or null if none. The
 * pointer stays valid until the next failing call on the same thread.
 */
const char *dressing_last_error(void);

/**
 * Library version as a static NUL-terminated string.
 */
const char *dressing_version(void);

/**
 * Elbow and hand positions for joint angles `q`.
 *
 * # Safety
 * `q` must point to 4 doubles; `elbow_out` and `hand_out` to 3 each.
 */
enum DressingStatus dressing_forward_kinematics(const double *q,
                                                double upper_arm,
                                                double forearm,
                                                double *elbow_out,
                                                double *hand_out);

/**
 * Joint angles of a posture.
 *
 * # Safety
 * `elbow` and `hand` must point to 3 doubles; `q_out` to 4.
 */
enum DressingStatus dressing_joint_angles(const double *elbow,
                                          const double *hand,
                                          double upper_arm,
                                          double forearm,
                                          double *q_out);

/**
 * Interior elbow angle in radians; pi for a straight arm.
 *
 * # Safety
 * `elbow` and `hand` must point to 3 doubles.
 */
enum DressingStatus dressing_elbow_angle(const double *elbow, const double *hand, double *psi_out);

/**
 * Unit stretch direction and the rank-one stiffness `k_x d d'` along it.
 * `stiffness_out` may be null.
 *
 * # Safety
 * `elbow`, `hand` and `direction_out` must point to 3 doubles;
 * `stiffness_out`, when not null, to 9.
 */
enum DressingStatus dressing_stretch_direction(const double *elbow,
                                               const double *hand,
                                               double k_x,
                                               double *direction_out,
                                               double *stiffness_out);

/**
 * Cartesian point to `(s, l, theta)` for a posture and elbow arc radius.
 *
 * # Safety
 * `elbow`, `hand`, `x` and `coord_out` must point to 3 doubles.
 */
enum DressingStatus dressing_to_dressing(const double *elbow,
                                         const double *hand,
                                         double arc_radius,
                                         const double *x,
                                         double *coord_out);

/**
 * `(s, l, theta)` back to a Cartesian point.
 *
 * # Safety
 * `elbow`, `hand`, `coord` and `x_out` must point to 3 doubles.
 */
enum DressingStatus dressing_from_dressing(const double *elbow,
                                           const double *hand,
                                           double arc_radius,
                                           const double *coord,
                                           double *x_out);

/**
 * Creates a tracker starting at a known posture. `weights` (4 doubles) may
 * be null for the recorded-stretch defaults.
 *
 * # Safety
 * `elbow` and `hand` must point to 3 doubles; `out` must be writable.
 */
enum DressingStatus dressing_tracker_new(const double *elbow,
                                         const double *hand,
                                         double upper_arm,
                                         double forearm,
                                         const double *weights,
                                         struct DressingTrackerHandle **out);

/**
 * Feeds one hand sample and returns the estimated elbow.
 *
 * # Safety
 * `tracker` must come from [`dressing_tracker_new`]; `hand` and
 * `elbow_out` must point to 3 doubles.
 */
enum DressingStatus dressing_tracker_update(struct DressingTrackerHandle *tracker,
                                            const double *hand,
                                            double *elbow_out);

/**
 * Current joint-angle estimate.
 *
 * # Safety
 * `tracker` must come from [`dressing_tracker_new`]; `q_out` must point
 * to 4 doubles.
 */
enum DressingStatus dressing_tracker_angles(const struct DressingTrackerHandle *tracker,
                                            double *q_out);

/**
 * # Safety
 * `tracker` must come from [`dressing_tracker_new`] or be null.
 */
void dressing_tracker_free(struct DressingTrackerHandle *tracker);

/**
 * Loads a policy from its two model files.
 *
 * # Safety
 * Paths must be NUL-terminated UTF-8; `out` must be writable.
 */
enum DressingStatus dressing_policy_load(const char *delta_l_path,
                                         const char *delta_theta_path,
                                         struct DressingPolicyHandle **out);

/**
 * Regresses `(delta_l, delta_theta)` at progress `s` and elbow angle `psi`.
 * `extrapolated_out` may be null.
 *
 * # Safety
 * `policy` must come from [`dressing_policy_load`]; outputs must be
 * writable.
 */
enum DressingStatus dressing_policy_query(const struct DressingPolicyHandle *policy,
                                          double s,
                                          double psi,
                                          double *delta_l_out,
                                          double *delta_theta_out,
                                          bool *extrapolated_out);

/**
 * # Safety
 * `policy` must come from [`dressing_policy_load`] or be null.
 */
void dressing_policy_free(struct DressingPolicyHandle *policy);

/**
 * Runs a rollout described by a configuration file and writes its trace.
 * `trace_path` may be null to skip writing.
 *
 * # Safety
 * Paths must be NUL-terminated UTF-8 or null where allowed; outputs must
 * be writable.
 */
enum DressingStatus dressing_rollout_run(const char *config_path,
                                         const char *trace_path,
                                         enum DressingOutcome *outcome_out,
                                         size_t *steps_out);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* DRESSING_H */
