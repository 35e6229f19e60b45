//! Reference trajectories and causal pseudo-differentiation.
//!
//! References are pure functions of time. The differentiators are small
//! single-owner state machines: a backward difference followed by a
//! first-order low-pass, which tolerates uneven sampling intervals.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// `centroid + amplitude * sin(2π t / period + phase)` for `cycles` periods.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Sinusoid {
    pub centroid: f64,
    pub amplitude: f64,
    pub period: f64,
    pub cycles: u32,
    pub phase: f64,
}

impl Sinusoid {
    pub fn new(centroid: f64, amplitude: f64, period: f64, cycles: u32) -> Self {
        Sinusoid {
            centroid,
            amplitude,
            period,
            cycles,
            phase: 0.0,
        }
    }

    pub fn duration(&self) -> f64 {
        self.period * f64::from(self.cycles)
    }

    fn eval(&self, t: f64) -> f64 {
        let t = t.min(self.duration());
        self.centroid + self.amplitude * (2.0 * PI * t / self.period + self.phase).sin()
    }
}

/// One sinusoidal component of a [`Segment::MultiSine`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Tone {
    pub amplitude: f64,
    pub period: f64,
    pub phase: f64,
}

/// A piece of a compound reference, evaluated on its own local clock.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum Segment {
    Sinusoid(Sinusoid),
    /// Sum of tones around a common centroid.
    MultiSine {
        centroid: f64,
        tones: Vec<Tone>,
        duration: f64,
    },
    Ramp {
        from: f64,
        to: f64,
        duration: f64,
    },
    Hold {
        value: f64,
        duration: f64,
    },
}

impl Segment {
    pub fn duration(&self) -> f64 {
        match self {
            Segment::Sinusoid(s) => s.duration(),
            Segment::MultiSine { duration, .. }
            | Segment::Ramp { duration, .. }
            | Segment::Hold { duration, .. } => *duration,
        }
    }

    fn eval(&self, t: f64) -> f64 {
        match self {
            Segment::Sinusoid(s) => s.eval(t),
            Segment::MultiSine {
                centroid,
                tones,
                duration,
            } => {
                let t = t.min(*duration);
                centroid
                    + tones
                        .iter()
                        .map(|k| k.amplitude * (2.0 * PI * t / k.period + k.phase).sin())
                        .sum::<f64>()
            }
            Segment::Ramp { from, to, duration } => {
                if *duration <= 0.0 {
                    return *to;
                }
                let s = (t / duration).clamp(0.0, 1.0);
                from + (to - from) * s
            }
            Segment::Hold { value, .. } => *value,
        }
    }

    /// Conservative bounds of the segment's values.
    fn bounds(&self) -> (f64, f64) {
        match self {
            Segment::Sinusoid(s) => (
                s.centroid - s.amplitude.abs(),
                s.centroid + s.amplitude.abs(),
            ),
            Segment::MultiSine {
                centroid, tones, ..
            } => {
                let a: f64 = tones.iter().map(|k| k.amplitude.abs()).sum();
                (centroid - a, centroid + a)
            }
            Segment::Ramp { from, to, .. } => (from.min(*to), from.max(*to)),
            Segment::Hold { value, .. } => (*value, *value),
        }
    }
}

/// Reference signal description.
///
/// Angle references are in degrees. `TriangularPressure` yields kilopascal
/// and is used only by the hysteresis measurement protocols.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum ReferenceSpec {
    Sinusoid(Sinusoid),
    Compound {
        segments: Vec<Segment>,
    },
    Constant {
        value: f64,
    },
    TriangularPressure {
        start: f64,
        vertices: Vec<f64>,
        slope: f64,
    },
}

impl ReferenceSpec {
    /// Total duration, or `None` for an unbounded constant.
    pub fn duration(&self) -> Option<f64> {
        match self {
            ReferenceSpec::Sinusoid(s) => Some(s.duration()),
            ReferenceSpec::Compound { segments } => {
                Some(segments.iter().map(Segment::duration).sum())
            }
            ReferenceSpec::Constant { .. } => None,
            ReferenceSpec::TriangularPressure { .. } => self.vertex_times().last().copied(),
        }
    }

    /// Lower and upper bound of the values this reference can take.
    pub fn bounds(&self) -> (f64, f64) {
        match self {
            ReferenceSpec::Sinusoid(s) => Segment::Sinusoid(*s).bounds(),
            ReferenceSpec::Compound { segments } => segments
                .iter()
                .map(Segment::bounds)
                .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), (a, b)| {
                    (lo.min(a), hi.max(b))
                }),
            ReferenceSpec::Constant { value } => (*value, *value),
            ReferenceSpec::TriangularPressure {
                start, vertices, ..
            } => vertices
                .iter()
                .fold((*start, *start), |(lo, hi), v| (lo.min(*v), hi.max(*v))),
        }
    }

    /// Times at which a triangular waveform reaches its start point and each
    /// vertex. Empty for other variants.
    pub fn vertex_times(&self) -> Vec<f64> {
        let ReferenceSpec::TriangularPressure {
            start,
            vertices,
            slope,
        } = self
        else {
            return Vec::new();
        };
        let mut times = Vec::with_capacity(vertices.len() + 1);
        let mut t = 0.0;
        let mut prev = *start;
        times.push(t);
        for v in vertices {
            t += (v - prev).abs() / slope;
            times.push(t);
            prev = *v;
        }
        times
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            ReferenceSpec::Sinusoid(s) => validate_sinusoid("reference.sinusoid", s),
            ReferenceSpec::Compound { segments } => {
                if segments.is_empty() {
                    return Err(Error::config(
                        "reference.segments",
                        0,
                        "compound needs at least one segment",
                    ));
                }
                for seg in segments {
                    match seg {
                        Segment::Sinusoid(s) => validate_sinusoid("reference.segment", s)?,
                        Segment::MultiSine {
                            tones, duration, ..
                        } => {
                            if !(*duration > 0.0) {
                                return Err(Error::config(
                                    "reference.segment.duration",
                                    duration,
                                    "must be positive",
                                ));
                            }
                            if tones.iter().any(|k| !(k.period > 0.0)) {
                                return Err(Error::config(
                                    "reference.segment.period",
                                    "<tone>",
                                    "must be positive",
                                ));
                            }
                        }
                        Segment::Ramp { duration, .. } | Segment::Hold { duration, .. } => {
                            if !(*duration >= 0.0) {
                                return Err(Error::config(
                                    "reference.segment.duration",
                                    duration,
                                    "must be nonnegative",
                                ));
                            }
                        }
                    }
                }
                Ok(())
            }
            ReferenceSpec::Constant { value } => {
                if value.is_finite() {
                    Ok(())
                } else {
                    Err(Error::config("reference.value", value, "must be finite"))
                }
            }
            ReferenceSpec::TriangularPressure {
                start,
                vertices,
                slope,
            } => {
                if !(*slope > 0.0) {
                    return Err(Error::config(
                        "reference.slope",
                        slope,
                        "slope must be positive",
                    ));
                }
                if vertices.is_empty() {
                    return Err(Error::config(
                        "reference.vertices",
                        0,
                        "need at least one vertex",
                    ));
                }
                let mut prev = *start;
                let mut prev_dir = 0.0;
                for v in vertices {
                    let dir = (v - prev).signum();
                    if *v == prev || dir == prev_dir {
                        return Err(Error::config(
                            "reference.vertices",
                            v,
                            "consecutive vertices must alternate in direction",
                        ));
                    }
                    prev_dir = dir;
                    prev = *v;
                }
                Ok(())
            }
        }
    }
}

fn validate_sinusoid(field: &str, s: &Sinusoid) -> Result<()> {
    if !(s.period > 0.0) {
        return Err(Error::config(
            &format!("{field}.period"),
            s.period,
            "period must be positive",
        ));
    }
    if s.cycles == 0 {
        return Err(Error::config(
            &format!("{field}.cycles"),
            s.cycles,
            "cycles must be at least 1",
        ));
    }
    if !(s.amplitude >= 0.0) {
        return Err(Error::config(
            &format!("{field}.amplitude"),
            s.amplitude,
            "amplitude must be nonnegative",
        ));
    }
    Ok(())
}

/// Evaluates a reference at time `t`. Past the end of a finite reference the
/// final value is held.
pub fn gen_reference(spec: &ReferenceSpec, t: f64) -> f64 {
    let t = t.max(0.0);
    match spec {
        ReferenceSpec::Sinusoid(s) => s.eval(t),
        ReferenceSpec::Constant { value } => *value,
        ReferenceSpec::Compound { segments } => {
            let mut t0 = 0.0;
            for seg in segments {
                let d = seg.duration();
                if t < t0 + d {
                    return seg.eval(t - t0);
                }
                t0 += d;
            }
            segments
                .last()
                .map(|seg| seg.eval(seg.duration()))
                .unwrap_or(0.0)
        }
        ReferenceSpec::TriangularPressure {
            start,
            vertices,
            slope,
        } => {
            let mut prev = *start;
            let mut t0 = 0.0;
            for v in vertices {
                let d = (v - prev).abs() / slope;
                if t < t0 + d {
                    return prev + (v - prev).signum() * slope * (t - t0);
                }
                t0 += d;
                prev = *v;
            }
            prev
        }
    }
}

/// Backward difference followed by a first-order low-pass.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DiffState {
    pub prev_value: f64,
    pub prev_time: f64,
    pub filtered_rate: f64,
    pub tau_filter: f64,
    seeded: bool,
}

impl DiffState {
    pub fn new(tau_filter: f64) -> Self {
        DiffState {
            prev_value: 0.0,
            prev_time: 0.0,
            filtered_rate: 0.0,
            tau_filter: tau_filter.max(0.0),
            seeded: false,
        }
    }

    pub fn is_seeded(&self) -> bool {
        self.seeded
    }
}

/// Advances the differentiator. The first call seeds the state and returns 0.
pub fn pseudo_diff_step(state: &mut DiffState, value: f64, t: f64) -> Result<f64> {
    if !state.seeded {
        state.prev_value = value;
        state.prev_time = t;
        state.filtered_rate = 0.0;
        state.seeded = true;
        return Ok(0.0);
    }
    if !(t > state.prev_time) {
        return Err(Error::NonMonotoneTime {
            prev: state.prev_time,
            t,
        });
    }
    let dt = t - state.prev_time;
    let raw = (value - state.prev_value) / dt;
    let alpha = dt / (state.tau_filter + dt);
    state.filtered_rate = (1.0 - alpha) * state.filtered_rate + alpha * raw;
    state.prev_value = value;
    state.prev_time = t;
    Ok(state.filtered_rate)
}

/// Two cascaded differentiators producing first and second derivatives.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DiffPair {
    pub first: DiffState,
    pub second: DiffState,
}

impl DiffPair {
    pub fn new(tau_filter: f64) -> Self {
        DiffPair {
            first: DiffState::new(tau_filter),
            second: DiffState::new(tau_filter),
        }
    }
}

/// Returns `(rate, rate2)`: the filtered first derivative and the filtered
/// derivative of that stream.
pub fn pseudo_diff2_step(states: &mut DiffPair, value: f64, t: f64) -> Result<(f64, f64)> {
    let rate = pseudo_diff_step(&mut states.first, value, t)?;
    let rate2 = pseudo_diff_step(&mut states.second, rate, t)?;
    Ok((rate, rate2))
}
