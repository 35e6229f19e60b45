//! Shared run records and the top-level run configuration.

use serde::{Deserialize, Serialize};

use crate::adaptforward::AdaptiveParams;
use crate::control::CascadeConfig;
use crate::error::{Error, Result};
use crate::plant::PlantParams;
use crate::signal::{ReferenceSpec, Sinusoid};

/// Default control period: 500 Hz.
pub const DEFAULT_DT: f64 = 1.0 / 500.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum ControllerKind {
    /// Cascaded PID only.
    Pid,
    /// PID plus the feedforward-D element.
    PidFf,
    /// PID plus the full adaptive compensator.
    PidAf,
}

impl ControllerKind {
    pub const ALL: [ControllerKind; 3] = [
        ControllerKind::Pid,
        ControllerKind::PidFf,
        ControllerKind::PidAf,
    ];

    /// Short file-friendly name: `pid`, `pid_ff`, `pid_af`.
    pub fn file_stem(self) -> &'static str {
        match self {
            ControllerKind::Pid => "pid",
            ControllerKind::PidFf => "pid_ff",
            ControllerKind::PidAf => "pid_af",
        }
    }

    pub fn label(self) -> &'static str {
        match self {
            ControllerKind::Pid => "PID",
            ControllerKind::PidFf => "PID+FF",
            ControllerKind::PidAf => "PID+AF",
        }
    }
}

impl std::str::FromStr for ControllerKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().replace('_', "-").as_str() {
            "pid" => Ok(ControllerKind::Pid),
            "pid-ff" | "pid+ff" => Ok(ControllerKind::PidFf),
            "pid-af" | "pid+af" => Ok(ControllerKind::PidAf),
            other => Err(Error::config(
                "controller",
                other,
                "expected pid, pid-ff or pid-af",
            )),
        }
    }
}

/// One logged control instant.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Sample {
    pub t: f64,
    pub theta_ref: f64,
    pub theta_ref_d1: f64,
    pub theta_ref_d2: f64,
    pub theta: f64,
    pub p_a: f64,
    pub p_b: f64,
    pub pd_a: f64,
    pub pd_b: f64,
    pub u_a: f64,
    pub u_b: f64,
    pub kp_a: f64,
    pub kp_b: f64,
    /// `theta_ref - theta`
    pub error: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TimeSeries {
    pub samples: Vec<Sample>,
    pub dt_nominal: f64,
}

impl TimeSeries {
    pub fn new(dt_nominal: f64) -> Self {
        TimeSeries {
            samples: Vec::new(),
            dt_nominal,
        }
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn errors(&self) -> Vec<f64> {
        self.samples.iter().map(|s| s.error).collect()
    }

    /// Largest deviation of a sampling interval from `dt_nominal`.
    pub fn max_interval_deviation(&self) -> f64 {
        self.samples
            .windows(2)
            .map(|w| (w[1].t - w[0].t - self.dt_nominal).abs())
            .fold(0.0, f64::max)
    }
}

/// Samples with `t0 <= t < t1`, order preserved. An empty result is an error
/// only when `required` is set.
pub fn series_window(series: &TimeSeries, t0: f64, t1: f64, required: bool) -> Result<TimeSeries> {
    if !(t0 < t1) {
        return Err(Error::InvalidInput(format!(
            "window start {t0} must precede end {t1}"
        )));
    }
    let samples: Vec<Sample> = series
        .samples
        .iter()
        .filter(|s| s.t >= t0 && s.t < t1)
        .copied()
        .collect();
    if required && samples.is_empty() {
        return Err(Error::InvalidInput(format!(
            "analysis window [{t0}, {t1}) is empty"
        )));
    }
    Ok(TimeSeries {
        samples,
        dt_nominal: series.dt_nominal,
    })
}

/// Everything needed to reproduce a run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunConfig {
    pub reference: ReferenceSpec,
    pub controller_kind: ControllerKind,
    pub cascade: CascadeConfig,
    pub adaptive: AdaptiveParams,
    pub plant: PlantParams,
    /// s
    pub duration: f64,
    /// s
    pub dt_nominal: f64,
    /// Each timestamp deviates from the nominal grid by at most this
    /// fraction of `dt_nominal`.
    pub jitter_fraction: f64,
    pub noise_seed: u64,
    pub repeats: u32,
    /// Low-pass time constant of the reference pseudo-differentiators, s.
    pub diff_tau: f64,
}

impl Default for RunConfig {
    /// Reference-design gains and adaptive parameters with
    /// a 20° / 8 s sinusoid around 30°, run for seven periods.
    fn default() -> Self {
        RunConfig {
            reference: ReferenceSpec::Sinusoid(Sinusoid::new(30.0, 20.0, 8.0, 7)),
            controller_kind: ControllerKind::PidAf,
            cascade: CascadeConfig::default(),
            adaptive: AdaptiveParams::default(),
            plant: PlantParams::default(),
            duration: 56.0,
            dt_nominal: DEFAULT_DT,
            jitter_fraction: 0.0,
            noise_seed: 1,
            repeats: 5,
            diff_tau: 0.02,
        }
    }
}

impl RunConfig {
    pub fn without_noise(mut self) -> Self {
        self.plant = self.plant.without_noise();
        self
    }

    pub fn with_kind(mut self, kind: ControllerKind) -> Self {
        self.controller_kind = kind;
        self
    }

    /// Worst-case deviation of a sampling interval from `dt_nominal`.
    pub fn jitter_bound(&self) -> f64 {
        2.0 * self.jitter_fraction * self.dt_nominal
    }
}

/// Checks every run-level and module-level constraint. Returns the config
/// unchanged when all hold.
pub fn validate_config(config: RunConfig) -> Result<RunConfig> {
    if !(config.duration > 0.0) {
        return Err(Error::config(
            "duration",
            config.duration,
            "duration must be positive",
        ));
    }
    if !(config.dt_nominal > 0.0) {
        return Err(Error::config(
            "dt",
            config.dt_nominal,
            "dt_nominal must be positive",
        ));
    }
    if !(0.0..0.5).contains(&config.jitter_fraction) {
        return Err(Error::config(
            "jitter",
            config.jitter_fraction,
            "jitter_fraction must lie in [0, 0.5)",
        ));
    }
    if config.repeats < 1 {
        return Err(Error::config(
            "repeats",
            config.repeats,
            "repeats must be at least 1",
        ));
    }
    if !(config.diff_tau >= 0.0) {
        return Err(Error::config(
            "diff_tau",
            config.diff_tau,
            "must be nonnegative",
        ));
    }
    config.adaptive.validate()?;
    config.cascade.validate()?;
    config.plant.validate()?;
    config.reference.validate()?;
    if matches!(config.reference, ReferenceSpec::TriangularPressure { .. }) {
        return Err(Error::config(
            "reference",
            "triangular",
            "pressure waveforms cannot drive the angle loop",
        ));
    }
    let (lo, hi) = config.reference.bounds();
    if lo < 0.0 || hi > config.adaptive.theta_cap {
        return Err(Error::config(
            "reference",
            format!("[{lo}, {hi}]"),
            "reference must stay within [0, theta_cap]",
        ));
    }
    if config.adaptive.kp0 != config.cascade.outer_a.kp {
        return Err(Error::config(
            "adaptive.kp0",
            config.adaptive.kp0,
            "must equal the outer proportional gain",
        ));
    }
    if config.adaptive.k_ff != config.cascade.k_ff {
        return Err(Error::config(
            "adaptive.k_ff",
            config.adaptive.k_ff,
            "must equal cascade.k_ff",
        ));
    }
    if config.plant.u_neutral != config.cascade.u_neutral {
        return Err(Error::config(
            "plant.u_neutral",
            config.plant.u_neutral,
            "must equal cascade.u_neutral",
        ));
    }
    Ok(config)
}
