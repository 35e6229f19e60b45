//! Discrete PID primitives and the two-subsystem cascade.
//!
//! Each subsystem drives one muscle. Its outer loop turns the angle error
//! into an increment of the pressure reference `P_d`, which also receives the
//! compensator's feedforward increment:
//!
//! ```text
//! P_d(k) = clamp(P_d(k-1) + ΔP_fb(k) + ΔP_ff(k))
//! ```
//!
//! The inner loop is positional and maps the pressure error to a valve
//! voltage around `u_neutral`. Subsystem B uses the negated outer and
//! feedforward gains of subsystem A and the same inner gains.

use serde::{Deserialize, Serialize};

use crate::adaptforward::{compensator_step, feedforward_delta, AdaptiveParams, CompensatorState};
use crate::error::{Error, Result};
use crate::types::ControllerKind;

/// Which loop a gain record belongs to. Units differ between the two.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum LoopRole {
    /// Pressure error (kPa) to valve voltage (V).
    Inner,
    /// Angle error (deg) to pressure-reference increment (kPa).
    Outer,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PidGains {
    pub kp: f64,
    pub ki: f64,
    pub kd: f64,
    pub role: LoopRole,
}

impl PidGains {
    pub fn outer(kp: f64, ki: f64, kd: f64) -> Self {
        PidGains {
            kp,
            ki,
            kd,
            role: LoopRole::Outer,
        }
    }

    pub fn inner(kp: f64, ki: f64, kd: f64) -> Self {
        PidGains {
            kp,
            ki,
            kd,
            role: LoopRole::Inner,
        }
    }

    fn is_finite(&self) -> bool {
        self.kp.is_finite() && self.ki.is_finite() && self.kd.is_finite()
    }
}

/// Mutable state of one PID loop.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PidState {
    pub integral: f64,
    pub prev_error: f64,
    pub prev_time: f64,
    pub output_limits: Option<(f64, f64)>,
    seeded: bool,
}

impl PidState {
    pub fn new(output_limits: Option<(f64, f64)>) -> Self {
        PidState {
            integral: 0.0,
            prev_error: 0.0,
            prev_time: 0.0,
            output_limits,
            seeded: false,
        }
    }
}

/// One PID update: trapezoidal integral, backward-difference derivative.
///
/// The first call seeds the state; its integral and derivative terms are 0.
/// When output limits are set the integral is clamped so that `ki * integral`
/// stays inside them, and the output is clamped as well.
pub fn pid_step(state: &mut PidState, gains: &PidGains, error: f64, t: f64) -> Result<f64> {
    let derivative = if state.seeded {
        if !(t > state.prev_time) {
            return Err(Error::NonMonotoneTime {
                prev: state.prev_time,
                t,
            });
        }
        let dt = t - state.prev_time;
        state.integral += 0.5 * (error + state.prev_error) * dt;
        (error - state.prev_error) / dt
    } else {
        state.seeded = true;
        0.0
    };
    if let Some((lo, hi)) = state.output_limits {
        if gains.ki != 0.0 {
            let (a, b) = (lo / gains.ki, hi / gains.ki);
            state.integral = state.integral.clamp(a.min(b), a.max(b));
        }
    }
    state.prev_error = error;
    state.prev_time = t;

    let out = gains.kp * error + gains.ki * state.integral + gains.kd * derivative;
    Ok(match state.output_limits {
        Some((lo, hi)) => out.clamp(lo, hi),
        None => out,
    })
}

/// Outer and feedforward gains of subsystem B, the exact negation of A's.
pub fn mirror_gains(outer_a: &PidGains, k_ff: f64) -> (PidGains, f64) {
    (
        PidGains {
            kp: -outer_a.kp,
            ki: -outer_a.ki,
            kd: -outer_a.kd,
            role: outer_a.role,
        },
        -k_ff,
    )
}

/// Incremental pressure-reference update, clamped to `limits`.
pub fn update_pressure_ref(pd_prev: f64, dp_fb: f64, dp_ff: f64, limits: (f64, f64)) -> f64 {
    (pd_prev + dp_fb + dp_ff).clamp(limits.0, limits.1)
}

/// Gains and limits of the cascade. Subsystem B's outer gains are derived.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CascadeConfig {
    pub outer_a: PidGains,
    /// Shared by both subsystems.
    pub inner: PidGains,
    /// kPa·s/deg, subsystem A sign.
    pub k_ff: f64,
    /// kPa
    pub pd_limits: (f64, f64),
    /// V
    pub u_limits: (f64, f64),
    /// V
    pub u_neutral: f64,
    /// Symmetric clamp on the per-sample outer-loop increment, kPa.
    pub dp_fb_limit: f64,
}

impl Default for CascadeConfig {
    fn default() -> Self {
        CascadeConfig {
            outer_a: PidGains::outer(8.0e-2, 2.0e-5, 0.0),
            inner: PidGains::inner(4.0e-2, 2.0e-6, 0.0),
            k_ff: 1.0e-2,
            pd_limits: (0.0, 500.0),
            u_limits: (0.0, 10.0),
            u_neutral: 5.0,
            dp_fb_limit: 10.0,
        }
    }
}

impl CascadeConfig {
    pub fn validate(&self) -> Result<()> {
        if self.outer_a.role != LoopRole::Outer {
            return Err(Error::config(
                "cascade.outer",
                "inner gains",
                "outer loop needs an outer gain record",
            ));
        }
        if self.inner.role != LoopRole::Inner {
            return Err(Error::config(
                "cascade.inner",
                "outer gains",
                "inner loop needs an inner gain record",
            ));
        }
        if !self.outer_a.is_finite() || !self.inner.is_finite() || !self.k_ff.is_finite() {
            return Err(Error::config(
                "cascade",
                "non-finite gain",
                "gains must be finite",
            ));
        }
        let (lo, hi) = self.pd_limits;
        if !(lo < hi) {
            return Err(Error::config(
                "cascade.pd_limits",
                format!("[{lo}, {hi}]"),
                "low must be below high",
            ));
        }
        let (lo, hi) = self.u_limits;
        if !(lo < hi) {
            return Err(Error::config(
                "cascade.u_limits",
                format!("[{lo}, {hi}]"),
                "low must be below high",
            ));
        }
        if !(lo <= self.u_neutral && self.u_neutral <= hi) {
            return Err(Error::config(
                "cascade.u_neutral",
                self.u_neutral,
                "must lie within u_limits",
            ));
        }
        if !(self.dp_fb_limit > 0.0) {
            return Err(Error::config(
                "cascade.dp_fb_limit",
                self.dp_fb_limit,
                "must be positive",
            ));
        }
        Ok(())
    }
}

/// Measurements and reference for one controller sample.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct ControlInput {
    pub theta_ref: f64,
    pub theta_ref_d1: f64,
    pub theta_ref_d2: f64,
    pub theta_meas: f64,
    pub p_a_meas: f64,
    pub p_b_meas: f64,
}

/// Per-subsystem quantities exposed for logging.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct SubsystemDiag {
    pub dp_fb: f64,
    pub dp_ff: f64,
    pub pd: f64,
    /// Live outer proportional gain, signed as applied.
    pub kp: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct ControlOutput {
    pub u_a: f64,
    pub u_b: f64,
    pub a: SubsystemDiag,
    pub b: SubsystemDiag,
}

#[derive(Debug, Clone)]
struct Subsystem {
    outer: PidState,
    inner: PidState,
    comp: CompensatorState,
    pd: f64,
    outer_gains: PidGains,
    k_ff: f64,
    /// +1 for subsystem A, -1 for B.
    sign: f64,
}

impl Subsystem {
    fn new(outer_gains: PidGains, k_ff: f64, sign: f64, cascade: &CascadeConfig, kp0: f64) -> Self {
        let lim = cascade.dp_fb_limit;
        let inner_limits = (
            cascade.u_limits.0 - cascade.u_neutral,
            cascade.u_limits.1 - cascade.u_neutral,
        );
        Subsystem {
            outer: PidState::new(Some((-lim, lim))),
            inner: PidState::new(Some(inner_limits)),
            comp: CompensatorState::new(kp0),
            pd: 0.0,
            outer_gains,
            k_ff,
            sign,
        }
    }

    fn step(
        &mut self,
        kind: ControllerKind,
        cascade: &CascadeConfig,
        adaptive: &AdaptiveParams,
        input: &ControlInput,
        p_meas: f64,
        t: f64,
    ) -> Result<(f64, SubsystemDiag)> {
        let (dp_ff, live) = match kind {
            ControllerKind::Pid => (0.0, self.outer_gains),
            ControllerKind::PidFf => (
                feedforward_delta(input.theta_ref_d1, self.k_ff),
                self.outer_gains,
            ),
            ControllerKind::PidAf => {
                let (_, kp) = compensator_step(
                    &mut self.comp,
                    input.theta_ref,
                    input.theta_ref_d1,
                    input.theta_ref_d2,
                    adaptive,
                )?;
                let live = PidGains {
                    kp: self.sign * kp,
                    ..self.outer_gains
                };
                (feedforward_delta(input.theta_ref_d1, self.k_ff), live)
            }
        };
        let error = input.theta_ref - input.theta_meas;
        let dp_fb = pid_step(&mut self.outer, &live, error, t)?;
        self.pd = update_pressure_ref(self.pd, dp_fb, dp_ff, cascade.pd_limits);

        let out = pid_step(&mut self.inner, &cascade.inner, self.pd - p_meas, t)?;
        let u = (cascade.u_neutral + out).clamp(cascade.u_limits.0, cascade.u_limits.1);
        Ok((
            u,
            SubsystemDiag {
                dp_fb,
                dp_ff,
                pd: self.pd,
                kp: live.kp,
            },
        ))
    }
}

/// Controller state bundle for both subsystems.
#[derive(Debug, Clone)]
pub struct Controller {
    kind: ControllerKind,
    cascade: CascadeConfig,
    adaptive: AdaptiveParams,
    a: Subsystem,
    b: Subsystem,
}

impl Controller {
    /// Starts from `P_d = 0` and `K_P = kp0` in both subsystems.
    pub fn new(kind: ControllerKind, cascade: CascadeConfig, adaptive: AdaptiveParams) -> Self {
        let (outer_b, k_ff_b) = mirror_gains(&cascade.outer_a, cascade.k_ff);
        let a = Subsystem::new(cascade.outer_a, cascade.k_ff, 1.0, &cascade, adaptive.kp0);
        let b = Subsystem::new(outer_b, k_ff_b, -1.0, &cascade, adaptive.kp0);
        Controller {
            kind,
            cascade,
            adaptive,
            a,
            b,
        }
    }

    pub fn kind(&self) -> ControllerKind {
        self.kind
    }

    pub fn pd(&self) -> (f64, f64) {
        (self.a.pd, self.b.pd)
    }
}

/// Runs one sample of both subsystems.
pub fn controller_step(
    ctx: &mut Controller,
    input: &ControlInput,
    t: f64,
) -> Result<ControlOutput> {
    let (u_a, a) = ctx.a.step(
        ctx.kind,
        &ctx.cascade,
        &ctx.adaptive,
        input,
        input.p_a_meas,
        t,
    )?;
    let (u_b, b) = ctx.b.step(
        ctx.kind,
        &ctx.cascade,
        &ctx.adaptive,
        input,
        input.p_b_meas,
        t,
    )?;
    Ok(ControlOutput { u_a, u_b, a, b })
}

/// Positional pressure loop used on its own by the hysteresis protocols.
#[derive(Debug, Clone)]
pub struct PressureLoop {
    state: PidState,
    gains: PidGains,
    u_neutral: f64,
    u_limits: (f64, f64),
}

impl PressureLoop {
    pub fn new(cascade: &CascadeConfig) -> Self {
        PressureLoop {
            state: PidState::new(Some((
                cascade.u_limits.0 - cascade.u_neutral,
                cascade.u_limits.1 - cascade.u_neutral,
            ))),
            gains: cascade.inner,
            u_neutral: cascade.u_neutral,
            u_limits: cascade.u_limits,
        }
    }

    pub fn step(&mut self, p_ref: f64, p_meas: f64, t: f64) -> Result<f64> {
        let out = pid_step(&mut self.state, &self.gains, p_ref - p_meas, t)?;
        Ok((self.u_neutral + out).clamp(self.u_limits.0, self.u_limits.1))
    }
}
