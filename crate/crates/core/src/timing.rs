//! Movement and rearrangement durations.
//!
//! Atom transport follows a symmetric jerk-limited profile: four segments of
//! equal length `t` with jerk `+j, -j, -j, +j`. Without a velocity limit the
//! peak speed is `j t^2` and the covered distance is `2 j t^3` over `4 t`.
//! When the peak would exceed `v_max` the ramps are clamped at
//! `t = sqrt(v_max / j)` and the remainder is covered at cruise speed.
//!
//! All lengths are micrometers and all durations microseconds.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::routing::RearrangementStep;

#[derive(Debug, Error, PartialEq)]
pub enum TimingError {
    #[error("negative move distance {0}")]
    NegativeDistance(f64),
    #[error("motion parameter `{0}` must be positive and finite")]
    InvalidParam(&'static str),
}

/// Transport and trap-transfer constants.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MotionParams {
    /// Micrometers per microsecond cubed.
    pub jerk: f64,
    /// Micrometers per microsecond.
    pub v_max: f64,
    /// Duration of one pickup or drop batch.
    pub transfer_time: f64,
}

impl Default for MotionParams {
    /// 0.44 nm/us^3 jerk, 1.1 um/us top speed, 15 us transfers.
    fn default() -> Self {
        Self {
            jerk: 4.4e-4,
            v_max: 1.1,
            transfer_time: 15.0,
        }
    }
}

impl MotionParams {
    pub fn validate(&self) -> Result<(), TimingError> {
        let ok = |v: f64| v.is_finite() && v > 0.0;
        if !ok(self.jerk) {
            return Err(TimingError::InvalidParam("jerk"));
        }
        if !ok(self.v_max) {
            return Err(TimingError::InvalidParam("v_max"));
        }
        if !ok(self.transfer_time) {
            return Err(TimingError::InvalidParam("transfer_time"));
        }
        Ok(())
    }

    /// Segment length at which the velocity limit is reached.
    pub fn clamp_segment(&self) -> f64 {
        (self.v_max / self.jerk).sqrt()
    }

    /// Shortest distance that reaches `v_max`.
    pub fn clamp_distance(&self) -> f64 {
        2.0 * self.jerk * self.clamp_segment().powi(3)
    }

    /// Time to transport an atom over `distance`.
    pub fn move_time(&self, distance: f64) -> Result<f64, TimingError> {
        if distance < 0.0 || distance.is_nan() {
            return Err(TimingError::NegativeDistance(distance));
        }
        Ok(self.travel(distance))
    }

    /// [`Self::move_time`] for distances known to be non-negative.
    pub(crate) fn travel(&self, distance: f64) -> f64 {
        debug_assert!(distance >= 0.0);
        if distance <= 0.0 {
            return 0.0;
        }
        let threshold = self.clamp_distance();
        if distance <= threshold {
            4.0 * (distance / (2.0 * self.jerk)).cbrt()
        } else {
            4.0 * self.clamp_segment() + (distance - threshold) / self.v_max
        }
    }

    /// Duration of one realized rearrangement step: transfers for every
    /// pickup and drop batch, every AOD shift, and the transit move.
    pub fn step_time(&self, step: &RearrangementStep) -> f64 {
        if step.moves.is_empty() {
            return 0.0;
        }
        let batches = step.pickup_batches.len() + step.drop_batches.len();
        let shifts: f64 = step.plan.shifts().map(|d| self.travel(d.abs())).sum();
        batches as f64 * self.transfer_time + shifts + self.travel(step.max_distance())
    }

    pub fn total_time<'a>(&self, steps: impl IntoIterator<Item = &'a RearrangementStep>) -> f64 {
        steps.into_iter().map(|s| self.step_time(s)).sum()
    }
}
