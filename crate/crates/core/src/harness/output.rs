//! File emission. Every float goes through [`fmt_g9`], so identical
//! inputs always produce identical bytes.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use crate::error::{Error, Result};
use crate::metrics::{aggregate_runs, AggregateSeries, ErrorMetrics};
use crate::types::{ControllerKind, Sample, TimeSeries};

use super::run::{ControllerRuns, SweepMode, SweepRow};

/// Column order of run logs.
pub const RUN_COLUMNS: [&str; 14] = [
    "t",
    "theta_ref",
    "theta_ref_d1",
    "theta_ref_d2",
    "theta",
    "error",
    "p_a",
    "p_b",
    "pd_a",
    "pd_b",
    "u_a",
    "u_b",
    "kp_ratio_a",
    "kp_ratio_b",
];

/// Nine significant digits, `%g` style: fixed notation for moderate
/// exponents, scientific otherwise, trailing zeros removed.
pub fn fmt_g9(x: f64) -> String {
    if x == 0.0 {
        return "0".into();
    }
    if !x.is_finite() {
        return x.to_string();
    }
    let sci = format!("{x:.8e}");
    let (mant, exp) = sci
        .split_once('e')
        .expect("scientific format has an exponent");
    let exp: i32 = exp.parse().expect("integer exponent");
    let trim = |s: &str| -> String {
        if s.contains('.') {
            s.trim_end_matches('0').trim_end_matches('.').to_string()
        } else {
            s.to_string()
        }
    };
    if (-5..9).contains(&exp) {
        trim(&format!("{:.*}", (8 - exp).max(0) as usize, x))
    } else {
        format!("{}e{exp}", trim(mant))
    }
}

/// Rounds to nine significant digits.
pub fn round9(x: f64) -> f64 {
    fmt_g9(x).parse().unwrap_or(x)
}

pub fn ensure_dir(dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))
}

pub fn write_file(path: &Path, contents: &str) -> Result<()> {
    fs::write(path, contents).map_err(|e| Error::io(path, e))
}

/// Renders a run log. Gains are written as ratios to the subsystem's
/// initial gain, `kp0` for A and `-kp0` for B.
pub fn run_csv(series: &TimeSeries, kp0: f64) -> String {
    let mut o = RUN_COLUMNS.join(",");
    o.push('\n');
    for s in &series.samples {
        let row = [
            s.t,
            s.theta_ref,
            s.theta_ref_d1,
            s.theta_ref_d2,
            s.theta,
            s.error,
            s.p_a,
            s.p_b,
            s.pd_a,
            s.pd_b,
            s.u_a,
            s.u_b,
            s.kp_a / kp0,
            s.kp_b / -kp0,
        ];
        let cells: Vec<String> = row.iter().map(|v| fmt_g9(*v)).collect();
        o.push_str(&cells.join(","));
        o.push('\n');
    }
    o
}

pub fn write_run_csv(path: &Path, series: &TimeSeries, kp0: f64) -> Result<()> {
    write_file(path, &run_csv(series, kp0))
}

/// Reads a CSV into named float columns. Every listed column must exist.
pub fn read_columns(path: &Path, wanted: &[&[&str]]) -> Result<Vec<Vec<f64>>> {
    let file = fs::File::open(path).map_err(|e| Error::io(path, e))?;
    let mut rdr = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_reader(file);
    let headers: Vec<String> = rdr
        .headers()?
        .iter()
        .map(|h| h.to_ascii_lowercase())
        .collect();
    let idx: Vec<usize> = wanted
        .iter()
        .map(|aliases| {
            aliases
                .iter()
                .find_map(|a| headers.iter().position(|h| h == a))
                .ok_or_else(|| {
                    Error::InvalidInput(format!(
                        "{}: missing column {} (have {})",
                        path.display(),
                        aliases.join(" or "),
                        headers.join(", ")
                    ))
                })
        })
        .collect::<Result<_>>()?;
    let mut cols = vec![Vec::new(); wanted.len()];
    for (row, rec) in rdr.records().enumerate() {
        let rec = rec?;
        for (c, &i) in idx.iter().enumerate() {
            let cell = rec.get(i).unwrap_or("");
            let v = cell.parse::<f64>().map_err(|_| {
                Error::InvalidInput(format!(
                    "{}: row {}: {cell:?} is not a number",
                    path.display(),
                    row + 2
                ))
            })?;
            cols[c].push(v);
        }
    }
    Ok(cols)
}

/// Parses a run log back into a series. Gains are restored from the ratios
/// with `kp0`; `dt_nominal` is the mean sampling interval.
pub fn read_run_csv(path: &Path, kp0: f64) -> Result<TimeSeries> {
    let wanted: Vec<&[&str]> = RUN_COLUMNS.iter().map(std::slice::from_ref).collect();
    let c = read_columns(path, &wanted)?;
    let n = c[0].len();
    let samples: Vec<Sample> = (0..n)
        .map(|k| Sample {
            t: c[0][k],
            theta_ref: c[1][k],
            theta_ref_d1: c[2][k],
            theta_ref_d2: c[3][k],
            theta: c[4][k],
            error: c[5][k],
            p_a: c[6][k],
            p_b: c[7][k],
            pd_a: c[8][k],
            pd_b: c[9][k],
            u_a: c[10][k],
            u_b: c[11][k],
            kp_a: c[12][k] * kp0,
            kp_b: c[13][k] * -kp0,
        })
        .collect();
    let dt_nominal = if n > 1 {
        (samples[n - 1].t - samples[0].t) / (n - 1) as f64
    } else {
        0.0
    };
    Ok(TimeSeries {
        samples,
        dt_nominal,
    })
}

const METRIC_COLUMNS: &str = "mae,rmse,e_max,e_min,var";

fn metric_cells(m: &ErrorMetrics) -> String {
    [m.mae, m.rmse, m.e_max, m.e_min, m.var]
        .iter()
        .map(|v| fmt_g9(*v))
        .collect::<Vec<_>>()
        .join(",")
}

pub fn comparison_metrics_csv(results: &[ControllerRuns]) -> String {
    let mut o = format!("controller,{METRIC_COLUMNS}\n");
    for r in results {
        let _ = writeln!(o, "{},{}", r.kind.file_stem(), metric_cells(&r.metrics));
    }
    o
}

pub fn sweep_metrics_csv(mode: SweepMode, rows: &[SweepRow]) -> String {
    let mut o = format!("mode,value,controller,{METRIC_COLUMNS}\n");
    let mode = match mode {
        SweepMode::Amplitude => "amplitude",
        SweepMode::Frequency => "frequency",
    };
    for r in rows {
        for (k, m) in &r.metrics {
            let _ = writeln!(
                o,
                "{mode},{},{},{}",
                fmt_g9(r.value),
                k.file_stem(),
                metric_cells(m)
            );
        }
    }
    o
}

/// Orders controllers with the adaptive one first, as in `PID+AF (PID, PID+FF)`.
fn headline_order(kinds: &[ControllerKind]) -> Vec<ControllerKind> {
    let mut v = kinds.to_vec();
    v.sort_by_key(|k| (*k != ControllerKind::PidAf, *k));
    v
}

fn cell(values: &[f64]) -> String {
    match values {
        [] => String::new(),
        [one] => format!("{one:.3}"),
        [first, rest @ ..] => format!(
            "{first:.3} ({})",
            rest.iter()
                .map(|v| format!("{v:.3}"))
                .collect::<Vec<_>>()
                .join(", ")
        ),
    }
}

fn header(kinds: &[ControllerKind]) -> String {
    let labels: Vec<&str> = kinds.iter().map(|k| k.label()).collect();
    cell_labels(&labels)
}

fn cell_labels(labels: &[&str]) -> String {
    match labels {
        [] => String::new(),
        [one] => one.to_string(),
        [first, rest @ ..] => format!("{first} ({})", rest.join(", ")),
    }
}

const METRIC_ROWS: [(&str, fn(&ErrorMetrics) -> f64); 5] = [
    ("MAE [deg]", |m| m.mae),
    ("RMSE [deg]", |m| m.rmse),
    ("Emax [deg]", |m| m.e_max),
    ("Emin [deg]", |m| m.e_min),
    ("Var [deg^2]", |m| m.var),
];

/// Human-readable comparison table.
pub fn comparison_metrics_txt(results: &[ControllerRuns]) -> String {
    let order = headline_order(&results.iter().map(|r| r.kind).collect::<Vec<_>>());
    let get = |k: ControllerKind| {
        &results
            .iter()
            .find(|r| r.kind == k)
            .expect("kind present")
            .metrics
    };
    let mut o = format!("{:<12} {}\n", "Metric", header(&order));
    for (name, f) in METRIC_ROWS {
        let vals: Vec<f64> = order.iter().map(|k| f(get(*k))).collect();
        let _ = writeln!(o, "{name:<12} {}", cell(&vals));
    }
    o
}

/// Human-readable sweep table, one block per metric.
pub fn sweep_metrics_txt(mode: SweepMode, rows: &[SweepRow]) -> String {
    let Some(first) = rows.first() else {
        return String::new();
    };
    let order = headline_order(&first.metrics.iter().map(|(k, _)| *k).collect::<Vec<_>>());
    let axis = match mode {
        SweepMode::Amplitude => "Amplitude [deg]",
        SweepMode::Frequency => "Period [s]",
    };
    let mut o = String::new();
    for (name, f) in METRIC_ROWS {
        let _ = writeln!(o, "{name}: {}", header(&order));
        let _ = writeln!(o, "{axis:<16}");
        for r in rows {
            let vals: Vec<f64> = order.iter().filter_map(|k| r.get(*k)).map(f).collect();
            let _ = writeln!(o, "{:<16} {}", fmt_g9(r.value), cell(&vals));
        }
        o.push('\n');
    }
    o
}

/// Writes `pid.csv`, `pid_ff.csv`, `pid_af.csv` (first repeat of each
/// controller), `metrics.csv` and `metrics.txt`.
pub fn emit_comparison(out: &Path, results: &[ControllerRuns]) -> Result<Vec<PathBuf>> {
    ensure_dir(out)?;
    let mut written = Vec::new();
    for r in results {
        let first = r
            .runs
            .first()
            .ok_or_else(|| Error::InvalidInput(format!("no runs for {}", r.kind.label())))?;
        let path = out.join(format!("{}.csv", r.kind.file_stem()));
        write_run_csv(&path, &first.series, first.config.cascade.outer_a.kp)?;
        written.push(path);
    }
    let path = out.join("metrics.csv");
    write_file(&path, &comparison_metrics_csv(results))?;
    written.push(path);
    let path = out.join("metrics.txt");
    write_file(&path, &comparison_metrics_txt(results))?;
    written.push(path);
    Ok(written)
}

pub fn emit_sweep(out: &Path, mode: SweepMode, rows: &[SweepRow]) -> Result<Vec<PathBuf>> {
    ensure_dir(out)?;
    let csv_path = out.join("metrics.csv");
    write_file(&csv_path, &sweep_metrics_csv(mode, rows))?;
    let txt_path = out.join("metrics.txt");
    write_file(&txt_path, &sweep_metrics_txt(mode, rows))?;
    Ok(vec![csv_path, txt_path])
}

/// Mean and min/max envelopes over repeats, aligned on the nominal grid so
/// that jittered runs can be combined.
pub fn envelopes(runs: &[TimeSeries], kp0: f64) -> Result<[AggregateSeries; 3]> {
    let aligned: Vec<TimeSeries> = runs
        .iter()
        .map(|r| TimeSeries {
            samples: r
                .samples
                .iter()
                .enumerate()
                .map(|(k, s)| Sample {
                    t: k as f64 * r.dt_nominal,
                    ..*s
                })
                .collect(),
            dt_nominal: r.dt_nominal,
        })
        .collect();
    Ok([
        aggregate_runs(&aligned, |s| s.theta)?,
        aggregate_runs(&aligned, |s| s.error)?,
        aggregate_runs(&aligned, |s| s.kp_a / kp0)?,
    ])
}

/// Plot-ready CSV: reference plus envelopes of angle, error and gain ratio.
pub fn plot_data_csv(runs: &[TimeSeries], kp0: f64) -> Result<String> {
    let [theta, error, kp] = envelopes(runs, kp0)?;
    let mut o = String::from(
        "t,theta_ref,theta_mean,theta_lower,theta_upper,error_mean,error_lower,error_upper,kp_ratio_mean,kp_ratio_lower,kp_ratio_upper\n",
    );
    for k in 0..theta.t.len() {
        let row = [
            theta.t[k],
            runs[0].samples[k].theta_ref,
            theta.mean[k],
            theta.lower[k],
            theta.upper[k],
            error.mean[k],
            error.lower[k],
            error.upper[k],
            kp.mean[k],
            kp.lower[k],
            kp.upper[k],
        ];
        o.push_str(&row.iter().map(|v| fmt_g9(*v)).collect::<Vec<_>>().join(","));
        o.push('\n');
    }
    Ok(o)
}

/// Writes `plot_<controller>.csv` and `plot_<controller>.svg` for every
/// controller in a comparison.
pub fn emit_plot_data(out: &Path, results: &[ControllerRuns]) -> Result<Vec<PathBuf>> {
    ensure_dir(out)?;
    let mut written = Vec::new();
    for r in results {
        let series: Vec<TimeSeries> = r.runs.iter().map(|x| x.series.clone()).collect();
        let kp0 = r.runs[0].config.cascade.outer_a.kp;
        let path = out.join(format!("plot_{}.csv", r.kind.file_stem()));
        write_file(&path, &plot_data_csv(&series, kp0)?)?;
        written.push(path);
        let path = out.join(format!("plot_{}.svg", r.kind.file_stem()));
        write_file(&path, &run_svg(&series[0], kp0, r.kind.label()))?;
        written.push(path);
    }
    Ok(written)
}

struct Line<'a> {
    label: &'a str,
    color: &'a str,
    y: Vec<f64>,
}

const PANEL_W: f64 = 760.0;
const PANEL_H: f64 = 150.0;
const MARGIN_L: f64 = 70.0;
const MAX_POINTS: usize = 1500;

fn panel(o: &mut String, top: f64, x: &[f64], lines: &[Line], ylabel: &str) {
    let (x0, x1) = (
        x.first().copied().unwrap_or(0.0),
        x.last().copied().unwrap_or(1.0),
    );
    let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
    for l in lines {
        for v in &l.y {
            lo = lo.min(*v);
            hi = hi.max(*v);
        }
    }
    if !(hi > lo) {
        lo -= 1.0;
        hi += 1.0;
    }
    let pad = 0.05 * (hi - lo);
    let (lo, hi) = (lo - pad, hi + pad);
    let xs = |v: f64| MARGIN_L + (v - x0) / (x1 - x0).max(1e-12) * PANEL_W;
    let ys = |v: f64| top + PANEL_H - (v - lo) / (hi - lo) * PANEL_H;
    let _ = writeln!(
        o,
        r##"<rect x="{MARGIN_L}" y="{top}" width="{PANEL_W}" height="{PANEL_H}" fill="none" stroke="#888"/>"##
    );
    let _ = writeln!(
        o,
        r#"<text x="8" y="{:.1}" font-size="11">{ylabel}</text>"#,
        top + PANEL_H / 2.0
    );
    let _ = writeln!(
        o,
        r#"<text x="{}" y="{:.1}" font-size="10">{}</text>"#,
        MARGIN_L - 4.0 - 40.0,
        top + 10.0,
        fmt_g9(round_to(hi, 3))
    );
    let _ = writeln!(
        o,
        r#"<text x="{}" y="{:.1}" font-size="10">{}</text>"#,
        MARGIN_L - 4.0 - 40.0,
        top + PANEL_H,
        fmt_g9(round_to(lo, 3))
    );
    let step = (x.len() / MAX_POINTS).max(1);
    for (i, l) in lines.iter().enumerate() {
        let pts: Vec<String> = (0..x.len())
            .step_by(step)
            .map(|k| format!("{:.2},{:.2}", xs(x[k]), ys(l.y[k])))
            .collect();
        let _ = writeln!(
            o,
            r#"<polyline fill="none" stroke="{}" stroke-width="1" points="{}"/>"#,
            l.color,
            pts.join(" ")
        );
        let _ = writeln!(
            o,
            r#"<text x="{:.1}" y="{:.1}" font-size="10" fill="{}">{}</text>"#,
            MARGIN_L + 8.0 + 90.0 * i as f64,
            top + 12.0,
            l.color,
            l.label
        );
    }
}

fn round_to(v: f64, digits: i32) -> f64 {
    let s = 10f64.powi(digits);
    (v * s).round() / s
}

/// Four stacked panels: tracking, error, pressures and gain ratio.
pub fn run_svg(series: &TimeSeries, kp0: f64, title: &str) -> String {
    let t: Vec<f64> = series.samples.iter().map(|s| s.t).collect();
    let col = |f: fn(&Sample) -> f64| series.samples.iter().map(f).collect::<Vec<f64>>();
    let height = 40.0 + 4.0 * (PANEL_H + 30.0);
    let mut o = format!(
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{}" height="{height}" font-family="sans-serif">
<text x="{MARGIN_L}" y="20" font-size="13">{title}</text>
"#,
        PANEL_W + MARGIN_L + 20.0
    );
    let panels: [(Vec<Line>, &str); 4] = [
        (
            vec![
                Line {
                    label: "reference",
                    color: "#d62728",
                    y: col(|s| s.theta_ref),
                },
                Line {
                    label: "actual",
                    color: "#1f77b4",
                    y: col(|s| s.theta),
                },
            ],
            "angle [deg]",
        ),
        (
            vec![Line {
                label: "error",
                color: "#2ca02c",
                y: col(|s| s.error),
            }],
            "error [deg]",
        ),
        (
            vec![
                Line {
                    label: "p_a",
                    color: "#9467bd",
                    y: col(|s| s.p_a),
                },
                Line {
                    label: "p_b",
                    color: "#8c564b",
                    y: col(|s| s.p_b),
                },
            ],
            "pressure [kPa]",
        ),
        (
            vec![Line {
                label: "kp/kp0",
                color: "#ff7f0e",
                y: series.samples.iter().map(|s| s.kp_a / kp0).collect(),
            }],
            "gain ratio",
        ),
    ];
    for (i, (lines, label)) in panels.iter().enumerate() {
        panel(&mut o, 35.0 + i as f64 * (PANEL_H + 30.0), &t, lines, label);
    }
    let _ = writeln!(
        o,
        r#"<text x="{:.1}" y="{:.1}" font-size="11">time [s]</text>"#,
        MARGIN_L + PANEL_W / 2.0,
        height - 8.0
    );
    o.push_str("</svg>\n");
    o
}

/// Angle against pressure, flagged dead-zone samples drawn as dots.
pub fn loop_svg(pressure: &[f64], angle: &[f64], flags: &[bool], title: &str) -> String {
    let (pmin, pmax) = pressure
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), v| {
            (a.min(*v), b.max(*v))
        });
    let (amin, amax) = angle
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), v| {
            (a.min(*v), b.max(*v))
        });
    let (w, h) = (560.0, 420.0);
    let xs = |v: f64| MARGIN_L + (v - pmin) / (pmax - pmin).max(1e-12) * w;
    let ys = |v: f64| 30.0 + h - (v - amin) / (amax - amin).max(1e-12) * h;
    let mut o = format!(
        r##"<svg xmlns="http://www.w3.org/2000/svg" width="{}" height="{}" font-family="sans-serif">
<text x="{MARGIN_L}" y="20" font-size="13">{title}</text>
<rect x="{MARGIN_L}" y="30" width="{w}" height="{h}" fill="none" stroke="#888"/>
"##,
        w + MARGIN_L + 20.0,
        h + 70.0
    );
    let step = (pressure.len() / (4 * MAX_POINTS)).max(1);
    let pts: Vec<String> = (0..pressure.len())
        .step_by(step)
        .map(|k| format!("{:.2},{:.2}", xs(pressure[k]), ys(angle[k])))
        .collect();
    let _ = writeln!(
        o,
        r##"<polyline fill="none" stroke="#1f77b4" stroke-width="1" points="{}"/>"##,
        pts.join(" ")
    );
    for k in (0..pressure.len())
        .filter(|k| flags.get(*k).copied().unwrap_or(false))
        .step_by(step)
    {
        let _ = writeln!(
            o,
            r##"<circle cx="{:.2}" cy="{:.2}" r="1.5" fill="#d4a017"/>"##,
            xs(pressure[k]),
            ys(angle[k])
        );
    }
    let _ = writeln!(
        o,
        r#"<text x="{:.1}" y="{:.1}" font-size="11">pressure [kPa] {} to {}</text>"#,
        MARGIN_L,
        h + 55.0,
        fmt_g9(round_to(pmin, 1)),
        fmt_g9(round_to(pmax, 1))
    );
    let _ = writeln!(
        o,
        r#"<text x="8" y="40" font-size="11">{} deg</text><text x="8" y="{:.1}" font-size="11">{} deg</text>"#,
        fmt_g9(round_to(amax, 1)),
        h + 30.0,
        fmt_g9(round_to(amin, 1))
    );
    o.push_str("</svg>\n");
    o
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn g9_formatting() {
        assert_eq!(fmt_g9(0.0), "0");
        assert_eq!(fmt_g9(-0.0), "0");
        assert_eq!(fmt_g9(1.0), "1");
        assert_eq!(fmt_g9(0.002), "0.002");
        assert_eq!(fmt_g9(30.000000001), "30");
        assert_eq!(fmt_g9(std::f64::consts::PI), "3.14159265");
        assert_eq!(fmt_g9(-123456.789012), "-123456.789");
        assert_eq!(fmt_g9(1.5e-7), "1.5e-7");
        assert_eq!(fmt_g9(2.5e12), "2.5e12");
        assert_eq!(fmt_g9(9.9999999999), "10");
        assert_eq!(fmt_g9(123456789.0), "123456789");
    }

    #[test]
    fn g9_keeps_nine_digits() {
        for x in [
            1.0 / 3.0,
            2.0f64.sqrt() * 1e4,
            -7.123456789123e-3,
            6.02214076e23,
        ] {
            let back: f64 = fmt_g9(x).parse().unwrap();
            assert!(((back - x) / x).abs() <= 5e-9, "{x} -> {back}");
        }
    }

    #[test]
    fn headline_puts_adaptive_first() {
        assert_eq!(
            headline_order(&ControllerKind::ALL),
            vec![
                ControllerKind::PidAf,
                ControllerKind::Pid,
                ControllerKind::PidFf
            ]
        );
        assert_eq!(
            header(&headline_order(&ControllerKind::ALL)),
            "PID+AF (PID, PID+FF)"
        );
        assert_eq!(cell(&[0.5, 1.25, 0.75]), "0.500 (1.250, 0.750)");
    }
}
