//! Progress-scalar dynamics `s <- s + min(c, s_target - s)`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Default per-step increment: 100 steps from hand to shoulder.
pub const DEFAULT_INCREMENT: f64 = 0.01;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ProgressDynamics {
    pub c: f64,
    pub s_target: f64,
}

impl ProgressDynamics {
    pub fn new(c: f64, s_target: f64) -> Result<Self> {
        if !(c > 0.0 && c.is_finite()) {
            return Err(Error::InvalidArgument(format!("increment must be positive, got {c}")));
        }
        if !(s_target > 0.0 && s_target <= 1.0) {
            return Err(Error::InvalidArgument(format!(
                "progress target must lie in (0, 1], got {s_target}"
            )));
        }
        Ok(Self { c, s_target })
    }

    /// Steps needed to reach the target from `s0`.
    pub fn steps_from(&self, s0: f64) -> usize {
        let mut s = s0;
        let mut n = 0;
        while s < self.s_target {
            s = step_progress(s, self);
            n += 1;
        }
        n
    }
}

impl Default for ProgressDynamics {
    fn default() -> Self {
        Self {
            c: DEFAULT_INCREMENT,
            s_target: 1.0,
        }
    }
}

/// Relative slack absorbing accumulated rounding in repeated increments.
const SNAP: f64 = 1e-9;

/// One progress update. The final step lands on the target exactly.
pub fn step_progress(s: f64, dynamics: &ProgressDynamics) -> f64 {
    let remaining = dynamics.s_target - s;
    if remaining <= dynamics.c * (1.0 + SNAP) {
        dynamics.s_target
    } else {
        s + dynamics.c
    }
}
