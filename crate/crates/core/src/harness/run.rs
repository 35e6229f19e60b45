//! Closed-loop experiment runner.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::control::{controller_step, mirror_gains, ControlInput, Controller};
use crate::error::{Error, Result};
use crate::metrics::{
    analysis_window, compute_metrics, mean_metrics, ErrorMetrics, WindowProtocol,
};
use crate::par::Execution;
use crate::plant::{plant_step, PlantState};
use crate::signal::{gen_reference, pseudo_diff2_step, DiffPair, ReferenceSpec, Sinusoid};
use crate::types::{validate_config, ControllerKind, RunConfig, Sample, TimeSeries};

/// Mixed into the run seed for the timestamp jitter stream so that jitter
/// and sensor noise are uncorrelated.
const JITTER_STREAM: u64 = 0x6a09_e667_f3bc_c909;

#[derive(Debug, Clone, PartialEq)]
pub struct RunResult {
    pub series: TimeSeries,
    /// On the analysis window, or the full run when no window applies.
    pub metrics: ErrorMetrics,
    pub config: RunConfig,
    pub seed: u64,
}

/// Seed used by repeat `repeat` of a run.
pub fn repeat_seed(config: &RunConfig, repeat: u32) -> u64 {
    config.noise_seed.wrapping_add(repeat as u64)
}

/// Analysis window implied by the reference: seven or more sinusoid periods
/// use periods two to six; a reference made of three identical cycles keeps
/// the middle one. Anything else is scored over the whole run.
pub fn default_window(reference: &ReferenceSpec) -> Option<(WindowProtocol, f64)> {
    match reference {
        ReferenceSpec::Sinusoid(s) if s.cycles >= 7 => {
            Some((WindowProtocol::Sweep7Period, s.period))
        }
        ReferenceSpec::Sinusoid(s) if s.cycles == 3 => Some((WindowProtocol::Demo3Cycle, s.period)),
        ReferenceSpec::Compound { segments } if !segments.is_empty() && segments.len() % 3 == 0 => {
            let n = segments.len() / 3;
            let same = segments[..n] == segments[n..2 * n] && segments[..n] == segments[2 * n..];
            let cycle: f64 = segments[..n].iter().map(|s| s.duration()).sum();
            same.then_some((WindowProtocol::Demo3Cycle, cycle))
        }
        _ => None,
    }
}

fn check_finite(step: usize, s: &Sample) -> Result<()> {
    let vals = [
        s.theta_ref,
        s.theta_ref_d1,
        s.theta_ref_d2,
        s.theta,
        s.p_a,
        s.p_b,
        s.pd_a,
        s.pd_b,
        s.u_a,
        s.u_b,
        s.kp_a,
        s.kp_b,
    ];
    if vals.iter().all(|v| v.is_finite()) {
        Ok(())
    } else {
        Err(Error::Numerical {
            step,
            state: format!("{s:?}"),
        })
    }
}

/// Runs one closed-loop experiment, repeat index `repeat`.
///
/// The reference is evaluated on the nominal grid `k·dt`. With jitter the
/// controller sees the perturbed timestamps and the plant integrates the
/// actual, unequal intervals between them.
pub fn run_experiment(config: &RunConfig, repeat: u32) -> Result<RunResult> {
    let config = validate_config(config.clone())?;
    let seed = repeat_seed(&config, repeat);
    let mut plant_params = config.plant.clone();
    plant_params.seed = seed;

    let dt = config.dt_nominal;
    let n = (config.duration / dt).round() as usize;
    let mut jitter_rng = ChaCha8Rng::seed_from_u64(seed ^ JITTER_STREAM);
    let j = config.jitter_fraction * dt;
    let stamps: Vec<f64> = (0..=n)
        .map(|k| {
            let nominal = k as f64 * dt;
            if k == 0 || j == 0.0 {
                nominal
            } else {
                nominal + jitter_rng.random_range(-j..=j)
            }
        })
        .collect();

    let mut state = PlantState::new(&plant_params);
    let mut controller = Controller::new(config.controller_kind, config.cascade, config.adaptive);
    let mut diff = DiffPair::new(config.diff_tau);
    let kp0_a = config.cascade.outer_a.kp;
    let mut meas = state.measure(&plant_params);
    let mut series = TimeSeries::new(dt);
    series.samples.reserve(n);

    for k in 0..n {
        let t = stamps[k];
        let theta_ref = gen_reference(&config.reference, k as f64 * dt);
        let (d1, d2) = pseudo_diff2_step(&mut diff, theta_ref, t)?;
        let out = controller_step(
            &mut controller,
            &ControlInput {
                theta_ref,
                theta_ref_d1: d1,
                theta_ref_d2: d2,
                theta_meas: meas.theta,
                p_a_meas: meas.p_a,
                p_b_meas: meas.p_b,
            },
            t,
        )?;
        let sample = Sample {
            t,
            theta_ref,
            theta_ref_d1: d1,
            theta_ref_d2: d2,
            theta: meas.theta,
            p_a: meas.p_a,
            p_b: meas.p_b,
            pd_a: out.a.pd,
            pd_b: out.b.pd,
            u_a: out.u_a,
            u_b: out.u_b,
            kp_a: out.a.kp,
            kp_b: out.b.kp,
            error: theta_ref - meas.theta,
        };
        check_finite(k, &sample)?;
        series.samples.push(sample);
        meas = plant_step(
            &mut state,
            &plant_params,
            out.u_a,
            out.u_b,
            stamps[k + 1] - t,
        );
    }
    debug_assert!(kp0_a > 0.0);

    let metrics = match default_window(&config.reference) {
        Some((protocol, period)) => {
            compute_metrics(&analysis_window(&series, protocol, period)?.errors())?
        }
        None => compute_metrics(&series.errors())?,
    };
    Ok(RunResult {
        series,
        metrics,
        config,
        seed,
    })
}

/// Outer gains applied to subsystem B, for converting logged gains to ratios.
pub fn kp0_pair(config: &RunConfig) -> (f64, f64) {
    let (b, _) = mirror_gains(&config.cascade.outer_a, config.cascade.k_ff);
    (config.cascade.outer_a.kp, b.kp)
}

/// All repeats of one configuration.
pub fn run_repeats(config: &RunConfig, exec: Execution) -> Result<Vec<RunResult>> {
    let config = validate_config(config.clone())?;
    exec.try_map((0..config.repeats).collect(), |r| {
        run_experiment(&config, r)
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct ControllerRuns {
    pub kind: ControllerKind,
    pub runs: Vec<RunResult>,
    /// Mean of the per-run window metrics.
    pub metrics: ErrorMetrics,
}

/// Runs every requested controller on the same reference, plant and seeds.
pub fn compare_controllers(
    base: &RunConfig,
    kinds: &[ControllerKind],
    exec: Execution,
) -> Result<Vec<ControllerRuns>> {
    let base = validate_config(base.clone())?;
    if kinds.is_empty() {
        return Err(Error::InvalidInput("no controllers to compare".into()));
    }
    let jobs: Vec<(ControllerKind, u32)> = kinds
        .iter()
        .flat_map(|k| (0..base.repeats).map(move |r| (*k, r)))
        .collect();
    let mut results = exec
        .try_map(jobs, |(kind, r)| {
            run_experiment(&base.clone().with_kind(kind), r)
        })?
        .into_iter();
    kinds
        .iter()
        .map(|&kind| {
            let runs: Vec<RunResult> = results.by_ref().take(base.repeats as usize).collect();
            let per_run: Vec<ErrorMetrics> = runs.iter().map(|r| r.metrics).collect();
            Ok(ControllerRuns {
                kind,
                metrics: mean_metrics(&per_run)?,
                runs,
            })
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum SweepMode {
    Amplitude,
    Frequency,
}

impl std::str::FromStr for SweepMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "amplitude" => Ok(SweepMode::Amplitude),
            "frequency" | "period" => Ok(SweepMode::Frequency),
            other => Err(Error::config(
                "sweep.mode",
                other,
                "expected amplitude or frequency",
            )),
        }
    }
}

impl SweepMode {
    /// Amplitudes in degrees, or periods in seconds.
    pub fn default_values(self) -> Vec<f64> {
        match self {
            SweepMode::Amplitude => vec![10.0, 15.0, 25.0, 30.0],
            SweepMode::Frequency => vec![10.0, 8.0, 6.0, 4.0, 2.0],
        }
    }

    /// Seven-period sinusoid for one sweep value, around `centroid`.
    pub fn reference(self, value: f64, centroid: f64) -> Sinusoid {
        match self {
            SweepMode::Amplitude => Sinusoid::new(centroid, value, 8.0, 7),
            SweepMode::Frequency => Sinusoid::new(centroid, 20.0, value, 7),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub value: f64,
    pub metrics: Vec<(ControllerKind, ErrorMetrics)>,
}

impl SweepRow {
    pub fn get(&self, kind: ControllerKind) -> Option<&ErrorMetrics> {
        self.metrics
            .iter()
            .find(|(k, _)| *k == kind)
            .map(|(_, m)| m)
    }
}

/// Builds the run config for one sweep cell from `base`.
pub fn sweep_config(base: &RunConfig, mode: SweepMode, value: f64) -> RunConfig {
    let centroid = match &base.reference {
        ReferenceSpec::Sinusoid(s) => s.centroid,
        _ => 30.0,
    };
    let s = mode.reference(value, centroid);
    RunConfig {
        duration: s.duration(),
        reference: ReferenceSpec::Sinusoid(s),
        ..base.clone()
    }
}

/// Runs a sweep and keeps only metrics. Every cell uses the base seeds and
/// repeat count.
pub fn run_sweep(
    base: &RunConfig,
    mode: SweepMode,
    values: &[f64],
    kinds: &[ControllerKind],
    exec: Execution,
) -> Result<Vec<SweepRow>> {
    if values.is_empty() {
        return Err(Error::config(
            "sweep.values",
            "[]",
            "sweep needs at least one value",
        ));
    }
    if kinds.is_empty() {
        return Err(Error::InvalidInput("no controllers to sweep".into()));
    }
    let configs: Vec<RunConfig> = values
        .iter()
        .map(|v| validate_config(sweep_config(base, mode, *v)))
        .collect::<Result<_>>()?;
    let jobs: Vec<(usize, ControllerKind, u32)> = (0..values.len())
        .flat_map(|i| {
            kinds
                .iter()
                .flat_map(move |k| (0..base.repeats).map(move |r| (i, *k, r)))
        })
        .collect();
    let per_run = exec.try_map(jobs, |(i, kind, r)| {
        run_experiment(&configs[i].clone().with_kind(kind), r).map(|res| res.metrics)
    })?;
    let mut it = per_run.chunks(base.repeats as usize);
    values
        .iter()
        .map(|v| {
            let metrics = kinds
                .iter()
                .map(|k| Ok((*k, mean_metrics(it.next().expect("chunk per cell"))?)))
                .collect::<Result<_>>()?;
            Ok(SweepRow { value: *v, metrics })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::signal::Segment;

    fn short(reference: ReferenceSpec, duration: f64) -> RunConfig {
        RunConfig {
            reference,
            duration,
            repeats: 1,
            ..RunConfig::default()
        }
    }

    #[test]
    fn windows_from_reference() {
        let s = Sinusoid::new(30.0, 20.0, 8.0, 7);
        assert_eq!(
            default_window(&ReferenceSpec::Sinusoid(s)),
            Some((WindowProtocol::Sweep7Period, 8.0))
        );
        let cyc = vec![
            Segment::Hold {
                value: 30.0,
                duration: 1.0,
            },
            Segment::Ramp {
                from: 30.0,
                to: 40.0,
                duration: 2.0,
            },
        ];
        let mut three = cyc.clone();
        three.extend(cyc.clone());
        three.extend(cyc);
        assert_eq!(
            default_window(&ReferenceSpec::Compound { segments: three }),
            Some((WindowProtocol::Demo3Cycle, 3.0))
        );
        assert_eq!(
            default_window(&ReferenceSpec::Constant { value: 3.0 }),
            None
        );
    }

    #[test]
    fn sample_count_and_grid() {
        let r = run_experiment(&short(ReferenceSpec::Constant { value: 10.0 }, 1.0), 0).unwrap();
        assert_eq!(r.series.len(), 500);
        assert_eq!(r.series.samples[0].t, 0.0);
        assert!(r.series.max_interval_deviation() < 1e-12);
        assert_eq!(r.seed, 1);
    }

    #[test]
    fn jitter_stays_within_bound() {
        let mut c = short(ReferenceSpec::Constant { value: 10.0 }, 2.0);
        c.jitter_fraction = 0.2;
        let r = run_experiment(&c, 0).unwrap();
        let dev = r.series.max_interval_deviation();
        assert!(dev > 0.0 && dev <= c.jitter_bound() + 1e-15, "{dev}");
    }

    #[test]
    fn quiescent_regulation() {
        let c = short(ReferenceSpec::Constant { value: 0.0 }, 5.0)
            .without_noise()
            .with_kind(ControllerKind::Pid);
        let r = run_experiment(&c, 0).unwrap();
        for s in r.series.samples.iter().filter(|s| s.t > 2.0) {
            assert!(s.error.abs() < 0.1, "t={} e={}", s.t, s.error);
        }
    }

    #[test]
    fn holds_thirty_degrees() {
        let c = short(ReferenceSpec::Constant { value: 30.0 }, 20.5)
            .without_noise()
            .with_kind(ControllerKind::Pid);
        let r = run_experiment(&c, 0).unwrap();
        let s = r.series.samples.iter().find(|s| s.t >= 20.0).unwrap();
        assert!(s.error.abs() < 0.5, "{}", s.error);
    }

    #[test]
    fn seeds_differ_by_repeat() {
        let c = RunConfig {
            repeats: 2,
            ..short(ReferenceSpec::Constant { value: 10.0 }, 1.0)
        };
        let runs = run_repeats(&c, Execution::Sequential).unwrap();
        assert_eq!((runs[0].seed, runs[1].seed), (1, 2));
        assert_ne!(runs[0].series, runs[1].series);
    }
}
