//! Tracking-error metrics and multi-run aggregation.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::types::{series_window, Sample, TimeSeries};

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct ErrorMetrics {
    pub mae: f64,
    pub rmse: f64,
    pub e_max: f64,
    pub e_min: f64,
    /// Population variance.
    pub var: f64,
}

pub fn compute_metrics(errors: &[f64]) -> Result<ErrorMetrics> {
    if errors.is_empty() {
        return Err(Error::InvalidInput(
            "cannot compute metrics of an empty error series".into(),
        ));
    }
    let n = errors.len() as f64;
    let mean = errors.iter().sum::<f64>() / n;
    let mae = errors.iter().map(|e| e.abs()).sum::<f64>() / n;
    let ms = errors.iter().map(|e| e * e).sum::<f64>() / n;
    let var = errors.iter().map(|e| (e - mean) * (e - mean)).sum::<f64>() / n;
    let (e_min, e_max) = errors
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), e| {
            (lo.min(*e), hi.max(*e))
        });
    Ok(ErrorMetrics {
        mae,
        rmse: ms.sqrt(),
        e_max,
        e_min,
        var,
    })
}

/// Elementwise mean of per-run metrics.
pub fn mean_metrics(runs: &[ErrorMetrics]) -> Result<ErrorMetrics> {
    if runs.is_empty() {
        return Err(Error::InvalidInput("no metrics to average".into()));
    }
    let n = runs.len() as f64;
    let sum = runs
        .iter()
        .fold(ErrorMetrics::default(), |acc, m| ErrorMetrics {
            mae: acc.mae + m.mae,
            rmse: acc.rmse + m.rmse,
            e_max: acc.e_max + m.e_max,
            e_min: acc.e_min + m.e_min,
            var: acc.var + m.var,
        });
    Ok(ErrorMetrics {
        mae: sum.mae / n,
        rmse: sum.rmse / n,
        e_max: sum.e_max / n,
        e_min: sum.e_min / n,
        var: sum.var / n,
    })
}

/// Which part of a run is analysed.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum WindowProtocol {
    /// Reference applied three times; the middle cycle is kept.
    Demo3Cycle,
    /// Seven periods; periods two to six are kept.
    Sweep7Period,
}

/// Cuts the analysed part out of a full run. `period` is the cycle length
/// for [`WindowProtocol::Demo3Cycle`] and the sinusoid period otherwise.
pub fn analysis_window(
    series: &TimeSeries,
    protocol: WindowProtocol,
    period: f64,
) -> Result<TimeSeries> {
    if !(period > 0.0) {
        return Err(Error::InvalidInput(format!(
            "period {period} must be positive"
        )));
    }
    let (t0, t1, needed) = match protocol {
        WindowProtocol::Demo3Cycle => (period, 2.0 * period, 3.0 * period),
        WindowProtocol::Sweep7Period => (period, 6.0 * period, 7.0 * period),
    };
    let end = series.samples.last().map(|s| s.t).unwrap_or(0.0);
    // tolerate the last sample sitting one step short of the nominal end
    if end + series.dt_nominal * 1.5 < needed {
        return Err(Error::InvalidInput(format!(
            "series ends at {end} s but the protocol needs {needed} s"
        )));
    }
    series_window(series, t0, t1, true)
}

/// Pointwise mean and min/max envelope across runs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AggregateSeries {
    pub t: Vec<f64>,
    pub mean: Vec<f64>,
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
}

/// Aggregates one field across runs sharing identical timestamps.
pub fn aggregate_runs(
    runs: &[TimeSeries],
    field: impl Fn(&Sample) -> f64,
) -> Result<AggregateSeries> {
    let first = runs
        .first()
        .ok_or_else(|| Error::InvalidInput("no runs to aggregate".into()))?;
    let n = first.len();
    for r in &runs[1..] {
        if r.len() != n
            || r.samples
                .iter()
                .zip(&first.samples)
                .any(|(a, b)| a.t != b.t)
        {
            return Err(Error::InvalidInput("runs do not share timestamps".into()));
        }
    }
    let mut out = AggregateSeries {
        t: first.samples.iter().map(|s| s.t).collect(),
        mean: Vec::with_capacity(n),
        lower: Vec::with_capacity(n),
        upper: Vec::with_capacity(n),
    };
    let count = runs.len() as f64;
    for k in 0..n {
        let (mut sum, mut lo, mut hi) = (0.0, f64::INFINITY, f64::NEG_INFINITY);
        for r in runs {
            let v = field(&r.samples[k]);
            sum += v;
            lo = lo.min(v);
            hi = hi.max(v);
        }
        // keep mean inside the envelope despite rounding
        out.mean.push((sum / count).clamp(lo, hi));
        out.lower.push(lo);
        out.upper.push(hi);
    }
    Ok(out)
}
