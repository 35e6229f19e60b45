//! Hysteresis measurement protocols and dead-zone detection.
//!
//! Two triangular pressure protocols drive muscle A through the inner
//! pressure loop while muscle B is held at atmospheric pressure. The
//! recorded (pressure, angle) pairs are cut into per-cycle loops and each
//! loop is screened for dead-zones: samples far from the loop's pressure
//! centre whose local angle/pressure gradient is a small fraction of the
//! loop's average gradient.

use serde::{Deserialize, Serialize};

use crate::control::{CascadeConfig, PressureLoop};
use crate::error::{Error, Result};
use crate::plant::{plant_step, PlantParams, PlantState};
use crate::signal::{gen_reference, ReferenceSpec};

pub const DEFAULT_GRADIENT_THRESHOLD: f64 = 0.3;
pub const DEFAULT_PRESSURE_THRESHOLD: f64 = 0.2;
pub const DEFAULT_HALF_WINDOW: usize = 10;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Protocol {
    /// From atmospheric rest, diminishing positive triangles on muscle A.
    A,
    /// From 420 kPa in muscle A, diminishing negative triangles.
    B,
}

impl std::str::FromStr for Protocol {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "a" => Ok(Protocol::A),
            "b" => Ok(Protocol::B),
            other => Err(Error::config("protocol", other, "expected a or b")),
        }
    }
}

impl Protocol {
    /// Commanded pressure waveform on muscle A.
    pub fn waveform(self) -> ReferenceSpec {
        match self {
            Protocol::A => ReferenceSpec::TriangularPressure {
                start: 0.0,
                vertices: vec![420.0, 0.0, 360.0, 0.0, 300.0, 0.0, 240.0, 0.0, 180.0],
                slope: 100.0,
            },
            Protocol::B => ReferenceSpec::TriangularPressure {
                start: 420.0,
                vertices: vec![0.0, 420.0, 60.0, 420.0, 120.0, 420.0, 180.0, 420.0, 240.0],
                slope: 100.0,
            },
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Direction {
    Ascending,
    Descending,
}

/// Recorded protocol data, starting at the first commanded vertex.
#[derive(Debug, Clone, PartialEq)]
pub struct ProtocolRun {
    pub t: Vec<f64>,
    /// Measured pressure of muscle A, kPa.
    pub pressure: Vec<f64>,
    /// Measured pressure of muscle B, kPa.
    pub pressure_b: Vec<f64>,
    /// Measured angle, degrees.
    pub angle: Vec<f64>,
    /// Times of the start point and every vertex of the waveform.
    pub vertex_times: Vec<f64>,
    /// Commanded vertex pressures, start point first.
    pub vertex_pressures: Vec<f64>,
}

/// Runs a measurement protocol on the simulated plant at `dt`.
///
/// For protocol B muscle A is first ramped to the start pressure and held
/// for two seconds; recording starts afterwards and the angle series is
/// shifted so that its minimum reads zero.
pub fn run_hysteresis_protocol(
    plant: &PlantParams,
    cascade: &CascadeConfig,
    protocol: Protocol,
    dt: f64,
) -> Result<ProtocolRun> {
    plant.validate()?;
    if !(dt > 0.0) {
        return Err(Error::config("dt", dt, "must be positive"));
    }
    let wave = protocol.waveform();
    let ReferenceSpec::TriangularPressure {
        start,
        vertices,
        slope,
    } = &wave
    else {
        unreachable!("protocol waveforms are triangular");
    };
    let vertex_times = wave.vertex_times();
    let mut vertex_pressures = vec![*start];
    vertex_pressures.extend_from_slice(vertices);

    let mut state = PlantState::new(plant);
    let mut loop_a = PressureLoop::new(cascade);
    let mut loop_b = PressureLoop::new(cascade);
    let mut meas = state.measure(plant);
    let mut k: usize = 0;
    let mut step =
        |p_ref: f64, meas: &mut crate::plant::Measurement, k: &mut usize| -> Result<()> {
            let t = *k as f64 * dt;
            let u_a = loop_a.step(p_ref, meas.p_a, t)?;
            let u_b = loop_b.step(0.0, meas.p_b, t)?;
            *meas = plant_step(&mut state, plant, u_a, u_b, dt);
            *k += 1;
            Ok(())
        };

    if *start > 0.0 {
        let ramp = start / slope;
        let settle = ramp + 2.0;
        let n = (settle / dt).round() as usize;
        for i in 0..n {
            let p_ref = (i as f64 * dt * slope).min(*start);
            step(p_ref, &mut meas, &mut k)?;
        }
    }

    let total = *vertex_times.last().unwrap_or(&0.0);
    let n = (total / dt).round() as usize + 1;
    let mut run = ProtocolRun {
        t: Vec::with_capacity(n),
        pressure: Vec::with_capacity(n),
        pressure_b: Vec::with_capacity(n),
        angle: Vec::with_capacity(n),
        vertex_times,
        vertex_pressures,
    };
    for i in 0..n {
        let t = i as f64 * dt;
        run.t.push(t);
        run.pressure.push(meas.p_a);
        run.pressure_b.push(meas.p_b);
        run.angle.push(meas.theta);
        step(gen_reference(&wave, t), &mut meas, &mut k)?;
    }
    if protocol == Protocol::B {
        let min = run.angle.iter().copied().fold(f64::INFINITY, f64::min);
        run.angle.iter_mut().for_each(|a| *a -= min);
    }
    Ok(run)
}

/// One vertex-to-vertex-to-vertex pressure cycle.
#[derive(Debug, Clone, PartialEq)]
pub struct HysteresisLoop {
    pub cycle_index: usize,
    pub t: Vec<f64>,
    pub pressure: Vec<f64>,
    pub angle: Vec<f64>,
    pub direction: Vec<Direction>,
}

impl HysteresisLoop {
    pub fn len(&self) -> usize {
        self.pressure.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pressure.is_empty()
    }

    /// Pressure span of the loop.
    pub fn amplitude(&self) -> f64 {
        let (lo, hi) = min_max(&self.pressure);
        hi - lo
    }
}

fn min_max(v: &[f64]) -> (f64, f64) {
    v.iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), x| {
            (lo.min(*x), hi.max(*x))
        })
}

/// Splits a recording into loops, one per consecutive vertex triple. A
/// trailing half cycle is dropped. Direction tags follow the commanded
/// pressure between vertices, so `vertex_pressures` must align with
/// `vertex_times`.
pub fn extract_loops(
    t: &[f64],
    pressure: &[f64],
    angle: &[f64],
    vertex_times: &[f64],
    vertex_pressures: &[f64],
) -> Result<Vec<HysteresisLoop>> {
    if vertex_times.len() < 3 {
        return Err(Error::InvalidInput(format!(
            "need at least 3 vertices to form a loop, got {}",
            vertex_times.len()
        )));
    }
    if vertex_pressures.len() != vertex_times.len() {
        return Err(Error::InvalidInput(
            "vertex times and pressures differ in length".into(),
        ));
    }
    if t.len() != pressure.len() || t.len() != angle.len() {
        return Err(Error::InvalidInput(
            "time, pressure and angle series differ in length".into(),
        ));
    }
    let (t_lo, t_hi) = (
        t.first().copied().unwrap_or(0.0),
        t.last().copied().unwrap_or(0.0),
    );
    if vertex_times
        .iter()
        .any(|v| *v < t_lo - 1e-9 || *v > t_hi + 1e-6)
    {
        return Err(Error::InvalidInput(
            "vertex times fall outside the series".into(),
        ));
    }
    let mut loops = Vec::new();
    let mut i = 0;
    while i + 2 < vertex_times.len() {
        let (v0, v1, v2) = (vertex_times[i], vertex_times[i + 1], vertex_times[i + 2]);
        let first_dir = if vertex_pressures[i + 1] > vertex_pressures[i] {
            Direction::Ascending
        } else {
            Direction::Descending
        };
        let second_dir = match first_dir {
            Direction::Ascending => Direction::Descending,
            Direction::Descending => Direction::Ascending,
        };
        let mut lp = HysteresisLoop {
            cycle_index: i / 2,
            t: Vec::new(),
            pressure: Vec::new(),
            angle: Vec::new(),
            direction: Vec::new(),
        };
        for k in 0..t.len() {
            if t[k] >= v0 && t[k] < v2 {
                lp.t.push(t[k]);
                lp.pressure.push(pressure[k]);
                lp.angle.push(angle[k]);
                lp.direction
                    .push(if t[k] < v1 { first_dir } else { second_dir });
            }
        }
        loops.push(lp);
        i += 2;
    }
    Ok(loops)
}

/// Least-squares slope of angle against pressure over
/// `[index - half_window, index + half_window]`, clipped to the loop.
/// Returns 0 when the window's pressure spread is below 0.1 kPa.
pub fn sample_gradient(lp: &HysteresisLoop, index: usize, half_window: usize) -> f64 {
    let w = half_window.max(1);
    let lo = index.saturating_sub(w);
    let hi = (index + w).min(lp.len().saturating_sub(1));
    let p = &lp.pressure[lo..=hi];
    let a = &lp.angle[lo..=hi];
    let (pmin, pmax) = min_max(p);
    if pmax - pmin < 0.1 {
        return 0.0;
    }
    let n = p.len() as f64;
    let mp = p.iter().sum::<f64>() / n;
    let ma = a.iter().sum::<f64>() / n;
    let (mut sxy, mut sxx) = (0.0, 0.0);
    for (x, y) in p.iter().zip(a) {
        sxy += (x - mp) * (y - ma);
        sxx += (x - mp) * (x - mp);
    }
    sxy / sxx
}

/// A contiguous run of flagged samples with one direction tag.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ZoneRun {
    pub direction: Direction,
    pub start: usize,
    /// Inclusive.
    pub end: usize,
    pub p_low: f64,
    pub p_high: f64,
}

impl ZoneRun {
    pub fn width(&self) -> f64 {
        self.p_high - self.p_low
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DeadzoneReport {
    pub flags: Vec<bool>,
    pub gradients: Vec<f64>,
    pub grad_ave: f64,
    pub p_ave: f64,
    pub zones: Vec<ZoneRun>,
}

impl DeadzoneReport {
    /// Widest zone entered while depressurizing (after a pressure maximum).
    pub fn red_width(&self) -> f64 {
        self.widest(Direction::Descending)
    }

    /// Widest zone entered while pressurizing (after a pressure minimum).
    pub fn blue_width(&self) -> f64 {
        self.widest(Direction::Ascending)
    }

    fn widest(&self, dir: Direction) -> f64 {
        self.zones
            .iter()
            .filter(|z| z.direction == dir)
            .map(ZoneRun::width)
            .fold(0.0, f64::max)
    }

    pub fn flagged_count(&self) -> usize {
        self.flags.iter().filter(|f| **f).count()
    }
}

/// Flags dead-zone samples of one loop.
pub fn detect_deadzones(
    lp: &HysteresisLoop,
    gradient_threshold: f64,
    pressure_threshold: f64,
    half_window: usize,
) -> Result<DeadzoneReport> {
    let need = 2 * half_window.max(1) + 2;
    if lp.len() < need {
        return Err(Error::InvalidInput(format!(
            "loop has {} samples, need {need}",
            lp.len()
        )));
    }
    let (p_min, p_max) = min_max(&lp.pressure);
    let range = p_max - p_min;
    if !(range > 0.0) {
        return Err(Error::InvalidInput("loop has zero pressure range".into()));
    }
    let (a_min, a_max) = min_max(&lp.angle);
    let p_ave = 0.5 * (p_max + p_min);
    let grad_ave = (a_max - a_min) / range;

    let gradients: Vec<f64> = (0..lp.len())
        .map(|i| sample_gradient(lp, i, half_window))
        .collect();
    let flags: Vec<bool> = gradients
        .iter()
        .zip(&lp.pressure)
        .map(|(g, p)| {
            g.abs() < gradient_threshold * grad_ave
                && (p - p_ave).abs() / range > pressure_threshold
        })
        .collect();

    let mut zones: Vec<ZoneRun> = Vec::new();
    for i in 0..flags.len() {
        if !flags[i] {
            continue;
        }
        let p = lp.pressure[i];
        match zones.last_mut() {
            Some(z) if z.end + 1 == i && z.direction == lp.direction[i] => {
                z.end = i;
                z.p_low = z.p_low.min(p);
                z.p_high = z.p_high.max(p);
            }
            _ => zones.push(ZoneRun {
                direction: lp.direction[i],
                start: i,
                end: i,
                p_low: p,
                p_high: p,
            }),
        }
    }
    Ok(DeadzoneReport {
        flags,
        gradients,
        grad_ave,
        p_ave,
        zones,
    })
}

/// Finds pressure turning points in a recording by zigzag: a maximum or
/// minimum is accepted once pressure has moved `min_excursion` away from
/// it. The first sample is always the start vertex, and the last extreme is
/// appended when it lies at least `min_excursion` from the previous vertex.
/// Returns `(times, pressures)` ready for [`extract_loops`].
pub fn detect_vertices(
    t: &[f64],
    pressure: &[f64],
    min_excursion: f64,
) -> Result<(Vec<f64>, Vec<f64>)> {
    if t.len() != pressure.len() || t.is_empty() {
        return Err(Error::InvalidInput(
            "time and pressure must be non-empty and equally long".into(),
        ));
    }
    if !(min_excursion > 0.0) {
        return Err(Error::InvalidInput(format!(
            "min_excursion {min_excursion} must be positive"
        )));
    }
    let mut idx = vec![0usize];
    let mut dir = 0i8;
    let mut ext = 0usize;
    for i in 1..pressure.len() {
        let p = pressure[i];
        match dir {
            0 => {
                if (p - pressure[0]).abs() >= min_excursion {
                    dir = if p > pressure[0] { 1 } else { -1 };
                    ext = i;
                }
            }
            1 => {
                if p > pressure[ext] {
                    ext = i;
                } else if pressure[ext] - p >= min_excursion {
                    idx.push(ext);
                    dir = -1;
                    ext = i;
                }
            }
            _ => {
                if p < pressure[ext] {
                    ext = i;
                } else if p - pressure[ext] >= min_excursion {
                    idx.push(ext);
                    dir = 1;
                    ext = i;
                }
            }
        }
    }
    let last = *idx.last().expect("start vertex");
    if dir != 0 && ext != last && (pressure[ext] - pressure[last]).abs() >= min_excursion {
        idx.push(ext);
    }
    Ok((
        idx.iter().map(|&i| t[i]).collect(),
        idx.iter().map(|&i| pressure[i]).collect(),
    ))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WidthSummary {
    pub amplitude: f64,
    pub red_width: f64,
    pub blue_width: f64,
}

/// Zone widths paired with loop amplitude, ordered by increasing amplitude.
pub fn deadzone_width_trend(
    reports: &[DeadzoneReport],
    loop_amplitudes: &[f64],
) -> Result<Vec<WidthSummary>> {
    if reports.len() < 2 || reports.len() != loop_amplitudes.len() {
        return Err(Error::InvalidInput(
            "need at least two reports, one amplitude each".into(),
        ));
    }
    let mut out: Vec<WidthSummary> = reports
        .iter()
        .zip(loop_amplitudes)
        .map(|(r, a)| WidthSummary {
            amplitude: *a,
            red_width: r.red_width(),
            blue_width: r.blue_width(),
        })
        .collect();
    out.sort_by(|a, b| a.amplitude.total_cmp(&b.amplitude));
    Ok(out)
}
