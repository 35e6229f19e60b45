//! Flat `key = value` configuration files.
//!
//! Blank lines and `#` comments are ignored. Every key may appear once,
//! except `reference.segment`, which is repeatable and builds a compound
//! reference in file order. Unknown keys are rejected. See
//! `config/defaults.conf` at the repository root for the full key list.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::Path;

use crate::error::{Error, Result};
use crate::signal::{ReferenceSpec, Segment, Sinusoid, Tone};
use crate::types::{validate_config, ControllerKind, RunConfig};

use super::demo::DemoReference;
use super::output::fmt_g9;

/// A parsed config file: the run configuration plus plan fields.
#[derive(Debug, Clone, PartialEq)]
pub struct Settings {
    pub run: RunConfig,
    pub controllers: Vec<ControllerKind>,
    /// Overrides the default sweep values when present.
    pub sweep_values: Option<Vec<f64>>,
}

impl Default for Settings {
    fn default() -> Self {
        Settings {
            run: RunConfig::default(),
            controllers: ControllerKind::ALL.to_vec(),
            sweep_values: None,
        }
    }
}

fn parse_f64(line: usize, key: &str, v: &str) -> Result<f64> {
    v.trim().parse::<f64>().map_err(|_| Error::ConfigParse {
        line,
        message: format!("{key}: expected a number, got {v:?}"),
    })
}

fn parse_list(line: usize, key: &str, v: &str) -> Result<Vec<f64>> {
    v.split(',')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(|s| parse_f64(line, key, s))
        .collect()
}

fn parse_u32(line: usize, key: &str, v: &str) -> Result<u32> {
    v.trim().parse::<u32>().map_err(|_| Error::ConfigParse {
        line,
        message: format!("{key}: expected a nonnegative integer, got {v:?}"),
    })
}

/// `hold V D`, `ramp FROM TO D`, `sine C A P CYCLES [PHASE]`,
/// `multisine C D A:P[:PHASE] ...`
fn parse_segment(line: usize, v: &str) -> Result<Segment> {
    let bad = |m: &str| Error::ConfigParse {
        line,
        message: format!("reference.segment: {m}: {v:?}"),
    };
    let words: Vec<&str> = v.split_whitespace().collect();
    let num = |i: usize| -> Result<f64> {
        words
            .get(i)
            .ok_or_else(|| bad("missing field"))
            .and_then(|w| parse_f64(line, "reference.segment", w))
    };
    match words.first().copied() {
        Some("hold") if words.len() == 3 => Ok(Segment::Hold {
            value: num(1)?,
            duration: num(2)?,
        }),
        Some("ramp") if words.len() == 4 => Ok(Segment::Ramp {
            from: num(1)?,
            to: num(2)?,
            duration: num(3)?,
        }),
        Some("sine") if words.len() == 5 || words.len() == 6 => {
            let cycles = parse_u32(line, "reference.segment", words[4])?;
            let mut s = Sinusoid::new(num(1)?, num(2)?, num(3)?, cycles);
            if words.len() == 6 {
                s.phase = num(5)?;
            }
            Ok(Segment::Sinusoid(s))
        }
        Some("multisine") if words.len() >= 4 => {
            let tones = words[3..]
                .iter()
                .map(|w| {
                    let parts = w
                        .split(':')
                        .map(|p| parse_f64(line, "reference.segment", p))
                        .collect::<Result<Vec<f64>>>()?;
                    match parts[..] {
                        [amplitude, period] => Ok(Tone {
                            amplitude,
                            period,
                            phase: 0.0,
                        }),
                        [amplitude, period, phase] => Ok(Tone {
                            amplitude,
                            period,
                            phase,
                        }),
                        _ => Err(bad("tone must be AMPLITUDE:PERIOD[:PHASE]")),
                    }
                })
                .collect::<Result<Vec<Tone>>>()?;
            Ok(Segment::MultiSine {
                centroid: num(1)?,
                duration: num(2)?,
                tones,
            })
        }
        _ => Err(bad("unrecognised segment")),
    }
}

fn segment_line(s: &Segment) -> String {
    match s {
        Segment::Hold { value, duration } => {
            format!("hold {} {}", fmt_g9(*value), fmt_g9(*duration))
        }
        Segment::Ramp { from, to, duration } => {
            format!(
                "ramp {} {} {}",
                fmt_g9(*from),
                fmt_g9(*to),
                fmt_g9(*duration)
            )
        }
        Segment::Sinusoid(x) => format!(
            "sine {} {} {} {} {}",
            fmt_g9(x.centroid),
            fmt_g9(x.amplitude),
            fmt_g9(x.period),
            x.cycles,
            fmt_g9(x.phase)
        ),
        Segment::MultiSine {
            centroid,
            tones,
            duration,
        } => {
            let mut out = format!("multisine {} {}", fmt_g9(*centroid), fmt_g9(*duration));
            for t in tones {
                let _ = write!(
                    out,
                    " {}:{}:{}",
                    fmt_g9(t.amplitude),
                    fmt_g9(t.period),
                    fmt_g9(t.phase)
                );
            }
            out
        }
    }
}

/// Parses config text on top of the defaults.
pub fn parse_config(text: &str) -> Result<Settings> {
    let mut entries: BTreeMap<String, (usize, String)> = BTreeMap::new();
    let mut segments: Vec<Segment> = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line = i + 1;
        let content = raw.split('#').next().unwrap_or("").trim();
        if content.is_empty() {
            continue;
        }
        let (k, v) = content.split_once('=').ok_or_else(|| Error::ConfigParse {
            line,
            message: format!("expected key = value, got {content:?}"),
        })?;
        let (k, v) = (k.trim().to_string(), v.trim().to_string());
        if k == "reference.segment" {
            segments.push(parse_segment(line, &v)?);
            continue;
        }
        if let Some((first, _)) = entries.insert(k.clone(), (line, v)) {
            return Err(Error::ConfigParse {
                line,
                message: format!("{k} already set on line {first}"),
            });
        }
    }

    let mut st = Settings::default();
    let mut controllers = None;
    let mut sweep_values = None;
    let run = &mut st.run;
    let mut kind_of_reference = None;
    let mut sine = Sinusoid::new(30.0, 20.0, 8.0, 7);
    let mut constant = None;
    let mut repeat_segments = 1u32;
    let mut kp0 = None;
    let mut duration = None;

    for (key, (line, v)) in &entries {
        let (line, v) = (*line, v.as_str());
        let f = || parse_f64(line, key, v);
        match key.as_str() {
            "duration" => duration = Some(f()?),
            "dt" => run.dt_nominal = f()?,
            "jitter" => run.jitter_fraction = f()?,
            "seed" => {
                run.noise_seed = v.parse().map_err(|_| Error::ConfigParse {
                    line,
                    message: format!("seed: expected an unsigned integer, got {v:?}"),
                })?
            }
            "repeats" => run.repeats = parse_u32(line, key, v)?,
            "diff_tau" => run.diff_tau = f()?,
            "controller" => run.controller_kind = v.parse()?,
            "controllers" => {
                controllers = Some(
                    v.split(',')
                        .map(|s| s.trim().parse::<ControllerKind>())
                        .collect::<Result<Vec<_>>>()?,
                )
            }
            "sweep.values" => sweep_values = Some(parse_list(line, key, v)?),

            "reference" => kind_of_reference = Some(v.to_string()),
            "reference.centroid" => sine.centroid = f()?,
            "reference.amplitude" => sine.amplitude = f()?,
            "reference.period" => sine.period = f()?,
            "reference.cycles" => sine.cycles = parse_u32(line, key, v)?,
            "reference.phase" => sine.phase = f()?,
            "reference.value" => constant = Some(f()?),
            "reference.repeat" => repeat_segments = parse_u32(line, key, v)?,

            "outer.kp" => run.cascade.outer_a.kp = f()?,
            "outer.ki" => run.cascade.outer_a.ki = f()?,
            "outer.kd" => run.cascade.outer_a.kd = f()?,
            "inner.kp" => run.cascade.inner.kp = f()?,
            "inner.ki" => run.cascade.inner.ki = f()?,
            "inner.kd" => run.cascade.inner.kd = f()?,
            "k_ff" => {
                run.cascade.k_ff = f()?;
                run.adaptive.k_ff = run.cascade.k_ff;
            }
            "pd_min" => run.cascade.pd_limits.0 = f()?,
            "pd_max" => run.cascade.pd_limits.1 = f()?,
            "u_min" => run.cascade.u_limits.0 = f()?,
            "u_max" => run.cascade.u_limits.1 = f()?,
            "u_neutral" => {
                run.cascade.u_neutral = f()?;
                run.plant.u_neutral = run.cascade.u_neutral;
            }
            "dp_fb_limit" => run.cascade.dp_fb_limit = f()?,

            "adaptive.m1_star" => run.adaptive.m1_star = f()?,
            "adaptive.m2_star" => run.adaptive.m2_star = f()?,
            "adaptive.b1" => run.adaptive.b1 = f()?,
            "adaptive.b2" => run.adaptive.b2 = f()?,
            "adaptive.c1" => run.adaptive.c1 = f()?,
            "adaptive.c2" => run.adaptive.c2 = f()?,
            "adaptive.theta_cap" => run.adaptive.theta_cap = f()?,
            "adaptive.mu" => run.adaptive.mu = f()?,
            "adaptive.kp0" => kp0 = Some(f()?),
            "adaptive.velocity_deadband" => run.adaptive.velocity_deadband = f()?,

            "plant.k_valve" => run.plant.k_valve = f()?,
            "plant.p_min" => run.plant.p_limits.0 = f()?,
            "plant.p_max" => run.plant.p_limits.1 = f()?,
            "plant.radii" => run.plant.play_radii = parse_list(line, key, v)?,
            "plant.weights" => run.plant.play_weights = parse_list(line, key, v)?,
            "plant.tau_theta" => run.plant.tau_theta = f()?,
            "plant.noise_theta" => run.plant.noise_sigma_theta = f()?,
            "plant.noise_p" => run.plant.noise_sigma_p = f()?,
            _ => {
                return Err(Error::ConfigParse {
                    line,
                    message: format!("unknown key {key:?}"),
                })
            }
        }
    }
    // the adaptive floor follows the outer gain unless set explicitly
    run.adaptive.kp0 = kp0.unwrap_or(run.cascade.outer_a.kp);

    let kind = kind_of_reference.unwrap_or_else(|| {
        if !segments.is_empty() {
            "compound".into()
        } else if constant.is_some() {
            "constant".into()
        } else {
            "sinusoid".into()
        }
    });
    run.reference = match kind.as_str() {
        "sinusoid" => ReferenceSpec::Sinusoid(sine),
        "constant" => ReferenceSpec::Constant {
            value: constant.ok_or_else(|| Error::config("reference.value", "missing", "constant reference needs a value"))?,
        },
        "compound" => {
            if segments.is_empty() {
                return Err(Error::config("reference.segment", "none", "compound reference needs segments"));
            }
            let n = segments.len();
            let segments = segments.iter().cycle().take(n * repeat_segments.max(1) as usize).cloned().collect();
            ReferenceSpec::Compound { segments }
        }
        other => match other.parse::<DemoReference>() {
            Ok(d) => d.spec(),
            Err(_) => {
                return Err(Error::config(
                    "reference",
                    other,
                    "expected sinusoid, constant, compound, demo-mixed, demo-ramp-hold or demo-compound",
                ))
            }
        },
    };
    run.duration = match duration {
        Some(d) => d,
        None => run.reference.duration().unwrap_or(run.duration),
    };
    if let Some(c) = controllers {
        st.controllers = c;
    }
    st.sweep_values = sweep_values;
    Ok(st)
}

/// Reads and validates a config file.
pub fn load_config(path: &Path) -> Result<Settings> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let st = parse_config(&text)?;
    validate_config(st.run.clone())?;
    Ok(st)
}

fn list(v: &[f64]) -> String {
    v.iter().map(|x| fmt_g9(*x)).collect::<Vec<_>>().join(", ")
}

/// Renders settings in the config format; parsing the result gives the
/// same settings back.
pub fn write_config(st: &Settings) -> String {
    let r = &st.run;
    let mut o = String::new();
    let mut kv = |k: &str, v: String| {
        let _ = writeln!(o, "{k} = {v}");
    };
    kv("duration", fmt_g9(r.duration));
    kv("dt", fmt_g9(r.dt_nominal));
    kv("jitter", fmt_g9(r.jitter_fraction));
    kv("seed", r.noise_seed.to_string());
    kv("repeats", r.repeats.to_string());
    kv("diff_tau", fmt_g9(r.diff_tau));
    kv(
        "controller",
        r.controller_kind.file_stem().replace('_', "-"),
    );
    kv(
        "controllers",
        st.controllers
            .iter()
            .map(|k| k.file_stem().replace('_', "-"))
            .collect::<Vec<_>>()
            .join(", "),
    );
    if let Some(v) = &st.sweep_values {
        kv("sweep.values", list(v));
    }
    match &r.reference {
        ReferenceSpec::Sinusoid(s) => {
            kv("reference", "sinusoid".into());
            kv("reference.centroid", fmt_g9(s.centroid));
            kv("reference.amplitude", fmt_g9(s.amplitude));
            kv("reference.period", fmt_g9(s.period));
            kv("reference.cycles", s.cycles.to_string());
            kv("reference.phase", fmt_g9(s.phase));
        }
        ReferenceSpec::Constant { value } => {
            kv("reference", "constant".into());
            kv("reference.value", fmt_g9(*value));
        }
        ReferenceSpec::Compound { segments } => {
            kv("reference", "compound".into());
            for s in segments {
                kv("reference.segment", segment_line(s));
            }
        }
        ReferenceSpec::TriangularPressure { .. } => {}
    }
    let c = &r.cascade;
    kv("outer.kp", fmt_g9(c.outer_a.kp));
    kv("outer.ki", fmt_g9(c.outer_a.ki));
    kv("outer.kd", fmt_g9(c.outer_a.kd));
    kv("inner.kp", fmt_g9(c.inner.kp));
    kv("inner.ki", fmt_g9(c.inner.ki));
    kv("inner.kd", fmt_g9(c.inner.kd));
    kv("k_ff", fmt_g9(c.k_ff));
    kv("pd_min", fmt_g9(c.pd_limits.0));
    kv("pd_max", fmt_g9(c.pd_limits.1));
    kv("u_min", fmt_g9(c.u_limits.0));
    kv("u_max", fmt_g9(c.u_limits.1));
    kv("u_neutral", fmt_g9(c.u_neutral));
    kv("dp_fb_limit", fmt_g9(c.dp_fb_limit));
    let a = &r.adaptive;
    kv("adaptive.m1_star", fmt_g9(a.m1_star));
    kv("adaptive.m2_star", fmt_g9(a.m2_star));
    kv("adaptive.b1", fmt_g9(a.b1));
    kv("adaptive.b2", fmt_g9(a.b2));
    kv("adaptive.c1", fmt_g9(a.c1));
    kv("adaptive.c2", fmt_g9(a.c2));
    kv("adaptive.theta_cap", fmt_g9(a.theta_cap));
    kv("adaptive.mu", fmt_g9(a.mu));
    kv("adaptive.kp0", fmt_g9(a.kp0));
    kv("adaptive.velocity_deadband", fmt_g9(a.velocity_deadband));
    let p = &r.plant;
    kv("plant.k_valve", fmt_g9(p.k_valve));
    kv("plant.p_min", fmt_g9(p.p_limits.0));
    kv("plant.p_max", fmt_g9(p.p_limits.1));
    kv("plant.radii", list(&p.play_radii));
    kv("plant.weights", list(&p.play_weights));
    kv("plant.tau_theta", fmt_g9(p.tau_theta));
    kv("plant.noise_theta", fmt_g9(p.noise_sigma_theta));
    kv("plant.noise_p", fmt_g9(p.noise_sigma_p));
    o
}
