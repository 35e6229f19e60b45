//! Hysteresis protocol runs, offline loop analysis and plant description.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use serde::Serialize;

use crate::control::CascadeConfig;
use crate::error::{Error, Result};
use crate::hysteresis::{
    deadzone_width_trend, detect_deadzones, detect_vertices, extract_loops,
    run_hysteresis_protocol, DeadzoneReport, Direction, HysteresisLoop, Protocol, ProtocolRun,
    WidthSummary, ZoneRun, DEFAULT_GRADIENT_THRESHOLD, DEFAULT_HALF_WINDOW,
    DEFAULT_PRESSURE_THRESHOLD,
};
use crate::plant::{measure_static_gain, PlantParams};

use super::output::{ensure_dir, fmt_g9, loop_svg, read_columns, round9, write_file};

/// Thresholds of the dead-zone screen.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct DeadzoneSettings {
    pub gradient_threshold: f64,
    pub pressure_threshold: f64,
    pub half_window: usize,
}

impl Default for DeadzoneSettings {
    fn default() -> Self {
        DeadzoneSettings {
            gradient_threshold: DEFAULT_GRADIENT_THRESHOLD,
            pressure_threshold: DEFAULT_PRESSURE_THRESHOLD,
            half_window: DEFAULT_HALF_WINDOW,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LoopAnalysis {
    pub loops: Vec<HysteresisLoop>,
    pub reports: Vec<DeadzoneReport>,
    /// Present when there are at least two loops.
    pub trend: Option<Vec<WidthSummary>>,
}

impl LoopAnalysis {
    /// Red widths ordered by loop amplitude never decrease.
    pub fn widths_non_decreasing(&self) -> Option<bool> {
        self.trend
            .as_ref()
            .map(|t| t.windows(2).all(|w| w[1].red_width >= w[0].red_width))
    }
}

/// Cuts a recording into loops and screens each one.
pub fn analyze_loops(
    t: &[f64],
    pressure: &[f64],
    angle: &[f64],
    vertex_times: &[f64],
    vertex_pressures: &[f64],
    settings: DeadzoneSettings,
) -> Result<LoopAnalysis> {
    let loops = extract_loops(t, pressure, angle, vertex_times, vertex_pressures)?;
    let reports = loops
        .iter()
        .map(|lp| {
            detect_deadzones(
                lp,
                settings.gradient_threshold,
                settings.pressure_threshold,
                settings.half_window,
            )
        })
        .collect::<Result<Vec<_>>>()?;
    let trend = if reports.len() >= 2 {
        let amps: Vec<f64> = loops.iter().map(HysteresisLoop::amplitude).collect();
        Some(deadzone_width_trend(&reports, &amps)?)
    } else {
        None
    };
    Ok(LoopAnalysis {
        loops,
        reports,
        trend,
    })
}

/// Runs a protocol on the plant and analyses the recording.
pub fn run_hysteresis(
    plant: &PlantParams,
    cascade: &CascadeConfig,
    protocol: Protocol,
    dt: f64,
    settings: DeadzoneSettings,
) -> Result<(ProtocolRun, LoopAnalysis)> {
    let run = run_hysteresis_protocol(plant, cascade, protocol, dt)?;
    let analysis = analyze_loops(
        &run.t,
        &run.pressure,
        &run.angle,
        &run.vertex_times,
        &run.vertex_pressures,
        settings,
    )?;
    Ok((run, analysis))
}

/// Recorded columns of an external log.
#[derive(Debug, Clone, PartialEq)]
pub struct Recording {
    pub t: Vec<f64>,
    pub pressure: Vec<f64>,
    pub angle: Vec<f64>,
}

/// Reads `t`, `pressure` and `angle` columns (aliases `time`, `p`/`p_a`,
/// `theta`) from any CSV with a header row.
pub fn read_recording(path: &Path) -> Result<Recording> {
    let mut c = read_columns(
        path,
        &[
            &["t", "time"],
            &["pressure", "p", "p_a"],
            &["angle", "theta"],
        ],
    )?;
    let angle = c.pop().expect("three columns");
    let pressure = c.pop().expect("three columns");
    let t = c.pop().expect("three columns");
    if t.windows(2).any(|w| !(w[1] > w[0])) {
        return Err(Error::InvalidInput(format!(
            "{}: time column must increase",
            path.display()
        )));
    }
    Ok(Recording { t, pressure, angle })
}

/// Analyses an external recording. Turning points are found with a
/// minimum excursion of a tenth of the pressure range.
pub fn analyze_recording(rec: &Recording, settings: DeadzoneSettings) -> Result<LoopAnalysis> {
    let (lo, hi) = rec
        .pressure
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), p| {
            (a.min(*p), b.max(*p))
        });
    if !(hi > lo) {
        return Err(Error::InvalidInput("pressure column is constant".into()));
    }
    let (vt, vp) = detect_vertices(&rec.t, &rec.pressure, 0.1 * (hi - lo))?;
    analyze_loops(&rec.t, &rec.pressure, &rec.angle, &vt, &vp, settings)
}

fn direction_name(d: Direction) -> &'static str {
    match d {
        Direction::Ascending => "ascending",
        Direction::Descending => "descending",
    }
}

/// Per-sample flags of every loop.
pub fn flags_csv(analysis: &LoopAnalysis) -> String {
    let mut o = String::from("cycle,t,pressure,angle,direction,gradient,flag\n");
    for (lp, rep) in analysis.loops.iter().zip(&analysis.reports) {
        for i in 0..lp.len() {
            let _ = writeln!(
                o,
                "{},{},{},{},{},{},{}",
                lp.cycle_index,
                fmt_g9(lp.t[i]),
                fmt_g9(lp.pressure[i]),
                fmt_g9(lp.angle[i]),
                direction_name(lp.direction[i]),
                fmt_g9(rep.gradients[i]),
                u8::from(rep.flags[i])
            );
        }
    }
    o
}

#[derive(Serialize)]
struct ZoneSummary {
    zone: &'static str,
    direction: &'static str,
    p_low: f64,
    p_high: f64,
    width: f64,
    samples: usize,
}

#[derive(Serialize)]
struct LoopSummary {
    cycle: usize,
    amplitude: f64,
    grad_ave: f64,
    p_ave: f64,
    red_width: f64,
    blue_width: f64,
    flagged: usize,
    samples: usize,
    zones: Vec<ZoneSummary>,
}

#[derive(Serialize)]
struct TrendRow {
    amplitude: f64,
    red_width: f64,
    blue_width: f64,
}

#[derive(Serialize)]
struct Summary<'a> {
    source: &'a str,
    thresholds: DeadzoneSettings,
    loops: Vec<LoopSummary>,
    trend: Option<Vec<TrendRow>>,
    widths_non_decreasing: Option<bool>,
}

fn zone_summary(z: &ZoneRun) -> ZoneSummary {
    ZoneSummary {
        zone: match z.direction {
            Direction::Descending => "red",
            Direction::Ascending => "blue",
        },
        direction: direction_name(z.direction),
        p_low: round9(z.p_low),
        p_high: round9(z.p_high),
        width: round9(z.width()),
        samples: z.end - z.start + 1,
    }
}

/// JSON summary: per-loop widths, average gradient and pressure centre,
/// plus the width trend. Floats are rounded to nine significant digits.
pub fn summary_json(
    source: &str,
    analysis: &LoopAnalysis,
    settings: DeadzoneSettings,
) -> Result<String> {
    let summary = Summary {
        source,
        thresholds: settings,
        loops: analysis
            .loops
            .iter()
            .zip(&analysis.reports)
            .map(|(lp, r)| LoopSummary {
                cycle: lp.cycle_index,
                amplitude: round9(lp.amplitude()),
                grad_ave: round9(r.grad_ave),
                p_ave: round9(r.p_ave),
                red_width: round9(r.red_width()),
                blue_width: round9(r.blue_width()),
                flagged: r.flagged_count(),
                samples: lp.len(),
                zones: r.zones.iter().map(zone_summary).collect(),
            })
            .collect(),
        trend: analysis.trend.as_ref().map(|t| {
            t.iter()
                .map(|w| TrendRow {
                    amplitude: round9(w.amplitude),
                    red_width: round9(w.red_width),
                    blue_width: round9(w.blue_width),
                })
                .collect()
        }),
        widths_non_decreasing: analysis.widths_non_decreasing(),
    };
    let mut s = serde_json::to_string_pretty(&summary)?;
    s.push('\n');
    Ok(s)
}

/// Raw protocol recording.
pub fn protocol_csv(run: &ProtocolRun) -> String {
    let mut o = String::from("t,pressure,pressure_b,angle\n");
    for k in 0..run.t.len() {
        let _ = writeln!(
            o,
            "{},{},{},{}",
            fmt_g9(run.t[k]),
            fmt_g9(run.pressure[k]),
            fmt_g9(run.pressure_b[k]),
            fmt_g9(run.angle[k])
        );
    }
    o
}

/// Writes `<stem>_flags.csv`, `<stem>_summary.json` and `<stem>.svg`.
pub fn emit_analysis(
    out: &Path,
    stem: &str,
    analysis: &LoopAnalysis,
    settings: DeadzoneSettings,
) -> Result<Vec<PathBuf>> {
    ensure_dir(out)?;
    let flags = out.join(format!("{stem}_flags.csv"));
    write_file(&flags, &flags_csv(analysis))?;
    let summary = out.join(format!("{stem}_summary.json"));
    write_file(&summary, &summary_json(stem, analysis, settings)?)?;
    let (mut p, mut a, mut f) = (Vec::new(), Vec::new(), Vec::new());
    for (lp, r) in analysis.loops.iter().zip(&analysis.reports) {
        p.extend_from_slice(&lp.pressure);
        a.extend_from_slice(&lp.angle);
        f.extend_from_slice(&r.flags);
    }
    let svg = out.join(format!("{stem}.svg"));
    write_file(&svg, &loop_svg(&p, &a, &f, stem))?;
    Ok(vec![flags, summary, svg])
}

/// Protocol run plus its analysis, named `hysteresis_<a|b>*`.
pub fn emit_hysteresis(
    out: &Path,
    protocol: Protocol,
    run: &ProtocolRun,
    analysis: &LoopAnalysis,
    settings: DeadzoneSettings,
) -> Result<Vec<PathBuf>> {
    let stem = match protocol {
        Protocol::A => "hysteresis_a",
        Protocol::B => "hysteresis_b",
    };
    ensure_dir(out)?;
    let raw = out.join(format!("{stem}_run.csv"));
    write_file(&raw, &protocol_csv(run))?;
    let mut written = vec![raw];
    written.extend(emit_analysis(out, stem, analysis, settings)?);
    Ok(written)
}

/// Static ascending curve from the virgin state, 1 kPa steps up to the
/// upper pressure limit.
pub fn plant_describe_csv(plant: &PlantParams) -> Result<String> {
    plant.validate()?;
    let mut o = String::from("dp,theta\n");
    let n = plant.p_limits.1.round() as usize;
    for i in 0..=n {
        let dp = i as f64;
        let _ = writeln!(
            o,
            "{},{}",
            fmt_g9(dp),
            fmt_g9(measure_static_gain(plant, dp))
        );
    }
    Ok(o)
}
