//! Adaptive hysteresis compensator.
//!
//! Two parts run side by side on the reference signal and its first two
//! pseudo-derivatives:
//!
//! * a feedforward-D element that adds `k_ff * rate` to the inner-loop
//!   pressure reference on every sample, and
//! * an accumulative law for the outer-loop proportional gain. While the
//!   reference decelerates toward a turning point the gain grows; once it
//!   accelerates away the gain is shed `1 + mu` times faster, and it never
//!   drops below `kp0`.
//!
//! The gain increment is
//!
//! ```text
//! accel < 0:  dKp = m1* · θd       · |accel| / ((b1 + |rate|)(c1 + |accel|)) · D
//! accel > 0:  dKp = m2* · (Θ − θd) · |accel| / ((b2 + |rate|)(c2 + |accel|)) · D
//! accel = 0:  dKp = 0
//! D = −(1 + (1 + h)/2 · mu) · h,   h = sign(rate · accel)
//! ```

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Parameters of the compensator, shared by both subsystems.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AdaptiveParams {
    /// kPa/(deg·s), deceleration branch scale.
    pub m1_star: f64,
    /// kPa/(deg·s), acceleration branch scale.
    pub m2_star: f64,
    /// deg/s
    pub b1: f64,
    /// deg/s
    pub b2: f64,
    /// deg/s²
    pub c1: f64,
    /// deg/s²
    pub c2: f64,
    /// Upper end of the reference range, degrees.
    pub theta_cap: f64,
    /// Extra shedding factor applied while the reference accelerates.
    pub mu: f64,
    /// Feedforward gain, kPa·s/deg.
    pub k_ff: f64,
    /// Initial and floor proportional gain, kPa/deg.
    pub kp0: f64,
    /// |rate| at or below this counts as zero when taking the direction sign.
    pub velocity_deadband: f64,
}

impl Default for AdaptiveParams {
    fn default() -> Self {
        AdaptiveParams {
            m1_star: 6.0e-2,
            m2_star: 9.6e-2,
            b1: 6.0,
            b2: 6.0,
            c1: 3.2e4,
            c2: 5.0e4,
            theta_cap: 60.0,
            mu: 0.6,
            k_ff: 1.0e-2,
            kp0: 8.0e-2,
            velocity_deadband: 0.5,
        }
    }
}

impl AdaptiveParams {
    pub fn validate(&self) -> Result<()> {
        let nonneg = [
            ("adaptive.m1_star", self.m1_star),
            ("adaptive.m2_star", self.m2_star),
            ("adaptive.velocity_deadband", self.velocity_deadband),
        ];
        for (field, v) in nonneg {
            if !(v >= 0.0) {
                return Err(Error::config(field, v, "must be nonnegative"));
            }
        }
        if !(self.mu >= 0.0) {
            return Err(Error::config(
                "adaptive.mu",
                self.mu,
                "μ must be nonnegative",
            ));
        }
        let positive = [
            ("adaptive.b1", self.b1),
            ("adaptive.b2", self.b2),
            ("adaptive.c1", self.c1),
            ("adaptive.c2", self.c2),
            ("adaptive.theta_cap", self.theta_cap),
        ];
        for (field, v) in positive {
            if !(v > 0.0) {
                return Err(Error::config(field, v, "must be positive"));
            }
        }
        if !self.k_ff.is_finite() {
            return Err(Error::config("adaptive.k_ff", self.k_ff, "must be finite"));
        }
        if !(self.kp0.is_finite() && self.kp0 >= 0.0) {
            return Err(Error::config(
                "adaptive.kp0",
                self.kp0,
                "must be nonnegative",
            ));
        }
        Ok(())
    }

    /// Supremum of |ΔK_P| on the deceleration (`accel < 0`) branch.
    pub fn bound_decel(&self) -> f64 {
        self.m1_star * self.theta_cap * (1.0 + self.mu) / self.b1
    }

    /// Supremum of |ΔK_P| on the acceleration (`accel > 0`) branch.
    pub fn bound_accel(&self) -> f64 {
        self.m2_star * self.theta_cap * (1.0 + self.mu) / self.b2
    }
}

/// Pressure-reference increment of the feedforward-D element.
#[inline]
pub fn feedforward_delta(rate: f64, k_ff: f64) -> f64 {
    k_ff * rate
}

/// Direction changer `D`.
pub fn direction_changer(rate: f64, accel: f64, mu: f64, deadband: f64) -> f64 {
    let rate = if rate.abs() <= deadband { 0.0 } else { rate };
    let h = sign(rate * accel);
    -(1.0 + 0.5 * (1.0 + h) * mu) * h
}

fn sign(x: f64) -> f64 {
    if x > 0.0 {
        1.0
    } else if x < 0.0 {
        -1.0
    } else {
        0.0
    }
}

/// Gain increment ΔK_P for one sample.
pub fn gain_increment(
    theta_ref: f64,
    rate: f64,
    accel: f64,
    params: &AdaptiveParams,
) -> Result<f64> {
    if !(0.0..=params.theta_cap).contains(&theta_ref) {
        return Err(Error::InvalidInput(format!(
            "reference angle {theta_ref} outside [0, {}]",
            params.theta_cap
        )));
    }
    let (scale, span, b, c) = if accel < 0.0 {
        (params.m1_star, theta_ref, params.b1, params.c1)
    } else if accel > 0.0 {
        (
            params.m2_star,
            params.theta_cap - theta_ref,
            params.b2,
            params.c2,
        )
    } else {
        return Ok(0.0);
    };
    let d = direction_changer(rate, accel, params.mu, params.velocity_deadband);
    let a = accel.abs();
    Ok(scale * span * a / ((b + rate.abs()) * (c + a)) * d)
}

/// Live proportional gain of one subsystem.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CompensatorState {
    pub kp_current: f64,
}

impl CompensatorState {
    pub fn new(kp0: f64) -> Self {
        CompensatorState { kp_current: kp0 }
    }
}

/// Accumulates `delta` with a floor at `kp0`.
pub fn update_gain(state: &mut CompensatorState, delta: f64, kp0: f64) {
    state.kp_current = kp0.max(state.kp_current + delta);
}

/// One compensator sample. Returns `(dp_ff, kp_live)`.
pub fn compensator_step(
    state: &mut CompensatorState,
    theta_ref: f64,
    rate: f64,
    accel: f64,
    params: &AdaptiveParams,
) -> Result<(f64, f64)> {
    let dp_ff = feedforward_delta(rate, params.k_ff);
    let delta = gain_increment(theta_ref, rate, accel, params)?;
    update_gain(state, delta, params.kp0);
    Ok((dp_ff, state.kp_current))
}
