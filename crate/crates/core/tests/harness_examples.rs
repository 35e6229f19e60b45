use std::collections::BTreeSet;
use std::path::Path;

use proptest::prelude::*;

use pamctl::harness::{
    compare_controllers, emit_comparison, envelopes, load_config, parse_config, read_run_csv,
    run_csv, run_experiment, run_repeats, run_sweep, sweep_config, write_run_csv, Settings,
    SweepMode, RUN_COLUMNS,
};
use pamctl::signal::ReferenceSpec;
use pamctl::{ControllerKind, Execution, RunConfig, Sample, TimeSeries};

fn constant_run(value: f64, duration: f64) -> RunConfig {
    RunConfig {
        reference: ReferenceSpec::Constant { value },
        controller_kind: ControllerKind::Pid,
        duration,
        repeats: 1,
        ..RunConfig::default()
    }
    .without_noise()
}

fn short(text: &str) -> RunConfig {
    let base = "duration = 16\nreference.cycles = 2\nreference.period = 8\nrepeats = 2\n";
    parse_config(&format!("{base}{text}")).unwrap().run
}

#[test]
fn zero_reference_stays_quiet() {
    let res = run_experiment(&constant_run(0.0, 6.0), 0).unwrap();
    for s in res.series.samples.iter().filter(|s| s.t > 2.0) {
        assert!(s.error.abs() < 0.1, "t = {}: {}", s.t, s.error);
    }
}

#[test]
fn integral_action_settles_through_the_band() {
    let res = run_experiment(&constant_run(30.0, 20.2), 0).unwrap();
    let s = res.series.samples.iter().find(|s| s.t >= 20.0).unwrap();
    assert!(s.error.abs() < 0.5, "{}", s.error);
}

#[test]
fn same_seed_same_bytes() {
    let cfg = short("");
    let kp0 = cfg.cascade.outer_a.kp;
    let a = run_csv(&run_experiment(&cfg, 1).unwrap().series, kp0);
    let b = run_csv(&run_experiment(&cfg, 1).unwrap().series, kp0);
    assert_eq!(a, b);
}

#[test]
fn zero_feedforward_gain_reduces_ff_to_pid() {
    let cfg = short("k_ff = 0\n");
    let res = compare_controllers(
        &cfg,
        &[ControllerKind::Pid, ControllerKind::PidFf],
        Execution::default(),
    )
    .unwrap();
    assert_eq!(res[0].runs[0].series, res[1].runs[0].series);
    assert_eq!(res[0].metrics, res[1].metrics);
}

#[test]
fn disabled_adaptation_reduces_af_to_ff() {
    let cfg = short("adaptive.m1_star = 0\nadaptive.m2_star = 0\n");
    let res = compare_controllers(
        &cfg,
        &[ControllerKind::PidFf, ControllerKind::PidAf],
        Execution::default(),
    )
    .unwrap();
    assert_eq!(res[0].runs[0].series, res[1].runs[0].series);
    assert_eq!(res[0].metrics, res[1].metrics);
}

#[test]
fn single_value_sweep_matches_compare() {
    let base = short("");
    let kinds = ControllerKind::ALL;
    let rows = run_sweep(
        &base,
        SweepMode::Amplitude,
        &[15.0],
        &kinds,
        Execution::default(),
    )
    .unwrap();
    assert_eq!(rows.len(), 1);
    let cmp = compare_controllers(
        &sweep_config(&base, SweepMode::Amplitude, 15.0),
        &kinds,
        Execution::default(),
    )
    .unwrap();
    for c in &cmp {
        assert_eq!(rows[0].get(c.kind), Some(&c.metrics));
    }
}

#[test]
fn repeats_differ_only_through_noise() {
    let quiet = short("").without_noise();
    let runs = run_repeats(&quiet, Execution::default()).unwrap();
    assert_eq!(runs[0].series, runs[1].series);

    let noisy = short("");
    let series: Vec<TimeSeries> = run_repeats(&noisy, Execution::default())
        .unwrap()
        .into_iter()
        .map(|r| r.series)
        .collect();
    let [theta, _, _] = envelopes(&series, noisy.cascade.outer_a.kp).unwrap();
    let widest = theta
        .upper
        .iter()
        .zip(&theta.lower)
        .map(|(u, l)| u - l)
        .fold(0.0, f64::max);
    assert!(widest > 0.0);
}

#[test]
fn csv_header_is_the_documented_list() {
    let res = run_experiment(&constant_run(0.0, 0.1), 0).unwrap();
    let text = run_csv(&res.series, 0.08);
    assert_eq!(text.lines().next().unwrap(), RUN_COLUMNS.join(","));
    assert_eq!(
        RUN_COLUMNS.join(","),
        "t,theta_ref,theta_ref_d1,theta_ref_d2,theta,error,p_a,p_b,pd_a,pd_b,u_a,u_b,kp_ratio_a,kp_ratio_b"
    );
}

#[test]
fn compare_manifest_and_reemission() {
    let cfg = RunConfig {
        repeats: 1,
        ..short("")
    };
    let res = compare_controllers(&cfg, &ControllerKind::ALL, Execution::default()).unwrap();
    let dir = tempfile::tempdir().unwrap();
    emit_comparison(dir.path(), &res).unwrap();
    let first = snapshot(dir.path());
    let names: BTreeSet<&str> = first.iter().map(|(n, _)| n.as_str()).collect();
    assert_eq!(
        names,
        BTreeSet::from([
            "metrics.csv",
            "metrics.txt",
            "pid.csv",
            "pid_af.csv",
            "pid_ff.csv"
        ])
    );
    emit_comparison(dir.path(), &res).unwrap();
    assert_eq!(first, snapshot(dir.path()));
}

fn snapshot(dir: &Path) -> Vec<(String, Vec<u8>)> {
    let mut files: Vec<(String, Vec<u8>)> = std::fs::read_dir(dir)
        .unwrap()
        .map(|e| {
            let e = e.unwrap();
            (
                e.file_name().to_string_lossy().into_owned(),
                std::fs::read(e.path()).unwrap(),
            )
        })
        .collect();
    files.sort();
    files
}

#[test]
fn shipped_defaults_file_matches_builtin_defaults() {
    let path = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../config/defaults.conf");
    assert_eq!(load_config(&path).unwrap(), Settings::default());
}

fn close9(a: f64, b: f64) -> bool {
    a == b || (a - b).abs() <= 5e-9 * a.abs().max(b.abs())
}

fn sample() -> impl Strategy<Value = Sample> {
    let v = || -1.0e4f64..1.0e4;
    (prop::array::uniform12(v()), 0.05f64..5.0).prop_map(|(x, kp)| Sample {
        t: x[0].abs(),
        theta_ref: x[1],
        theta_ref_d1: x[2],
        theta_ref_d2: x[3],
        theta: x[4],
        error: x[1] - x[4],
        p_a: x[5],
        p_b: x[6],
        pd_a: x[7],
        pd_b: x[8],
        u_a: x[9],
        u_b: x[10],
        kp_a: kp * 0.08,
        kp_b: -kp * 0.08,
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn csv_round_trip_keeps_nine_digits(samples in prop::collection::vec(sample(), 1..40)) {
        let series = TimeSeries { samples, dt_nominal: 0.002 };
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("run.csv");
        write_run_csv(&path, &series, 0.08).unwrap();
        let back = read_run_csv(&path, 0.08).unwrap();
        prop_assert_eq!(back.len(), series.len());
        for (a, b) in series.samples.iter().zip(&back.samples) {
            for (x, y) in [
                (a.t, b.t), (a.theta_ref, b.theta_ref), (a.theta_ref_d1, b.theta_ref_d1),
                (a.theta_ref_d2, b.theta_ref_d2), (a.theta, b.theta), (a.error, b.error),
                (a.p_a, b.p_a), (a.p_b, b.p_b), (a.pd_a, b.pd_a), (a.pd_b, b.pd_b),
                (a.u_a, b.u_a), (a.u_b, b.u_b), (a.kp_a, b.kp_a), (a.kp_b, b.kp_b),
            ] {
                prop_assert!(close9(x, y), "{} vs {}", x, y);
            }
        }
    }
}
