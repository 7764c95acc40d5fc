//! Bimanual robot-assisted dressing.
//!
//! One robot holds the person's hand and stretches the arm; the other moves
//! the garment along the arm. The crate covers:
//!
//! - [`geometry`]: four-angle arm kinematics in the shoulder frame.
//! - [`estimator`]: recursive elbow tracking from hand motion alone.
//! - [`stretch`]: stretch direction, selective stiffness and a simulated hand.
//! - [`frame`]: the arm-relative `(s, l, theta)` dressing coordinate.
//! - [`policy`]: GMM/GMR dressing policies learned from demonstrations.
//! - [`rollout`]: closed-loop simulation of the whole stack.
//! - [`io`] and [`cli`]: file formats and the `dressing` command.

// `!(x > 0.0)` is used on purpose so NaN fails the check.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod cli;
pub mod error;
pub mod estimator;
pub mod frame;
pub mod geometry;
pub mod io;
pub mod policy;
pub mod rollout;
pub mod stretch;

pub use error::{Error, Result};
pub use geometry::{ArmPosture, JointAngles, LimbLengths, Point3, RigidTransform, UnitVec3, Vec3};
