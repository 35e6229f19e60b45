use pamctl::adaptforward::AdaptiveParams;
use pamctl::control::{controller_step, CascadeConfig, ControlInput, Controller};
use pamctl::plant::{plant_step, PlantParams, PlantState};
use pamctl::signal::{gen_reference, pseudo_diff2_step, DiffPair, ReferenceSpec, Sinusoid};
use pamctl::ControllerKind;

const DT: f64 = 0.002;

#[test]
fn identity_stub_error_decays_after_first_overshoot() {
    // the "plant" reports theta = gain · P_d,A with no dynamics at all
    let gain = 0.5;
    let mut ctl = Controller::new(
        ControllerKind::Pid,
        CascadeConfig::default(),
        AdaptiveParams::default(),
    );
    let mut theta = 0.0;
    let mut errors = Vec::new();
    for k in 0..20_000 {
        let input = ControlInput {
            theta_ref: 30.0,
            theta_meas: theta,
            ..Default::default()
        };
        let out = controller_step(&mut ctl, &input, k as f64 * DT).unwrap();
        errors.push(30.0 - theta);
        theta = gain * out.a.pd;
    }
    let cross = errors
        .windows(2)
        .position(|w| w[0].signum() != w[1].signum())
        .expect("error never changes sign")
        + 1;
    // the overshoot peaks some steps after the crossing
    let peak = errors[cross..]
        .windows(2)
        .position(|w| w[1].abs() < w[0].abs())
        .map_or(cross, |i| cross + i);
    for w in errors[peak..].windows(2) {
        assert!(w[1].abs() <= w[0].abs() + 1e-12, "{} then {}", w[0], w[1]);
    }
    assert!(errors.last().unwrap().abs() < 1e-3);
}

fn closed_loop(
    kind: ControllerKind,
    steps: usize,
    mut check: impl FnMut(&pamctl::control::ControlOutput),
) {
    let spec = ReferenceSpec::Sinusoid(Sinusoid::new(30.0, 20.0, 4.0, 3));
    let plant = PlantParams {
        seed: 5,
        ..PlantParams::default()
    };
    let cascade = CascadeConfig::default();
    let mut ctl = Controller::new(kind, cascade, AdaptiveParams::default());
    let mut st = PlantState::new(&plant);
    let mut diff = DiffPair::new(0.02);
    let mut meas = st.measure(&plant);
    for k in 0..steps {
        let t = k as f64 * DT;
        let r = gen_reference(&spec, t);
        let (d1, d2) = pseudo_diff2_step(&mut diff, r, t).unwrap();
        let input = ControlInput {
            theta_ref: r,
            theta_ref_d1: d1,
            theta_ref_d2: d2,
            theta_meas: meas.theta,
            p_a_meas: meas.p_a,
            p_b_meas: meas.p_b,
        };
        let out = controller_step(&mut ctl, &input, t).unwrap();
        check(&out);
        meas = plant_step(&mut st, &plant, out.u_a, out.u_b, DT);
    }
}

#[test]
fn antagonistic_symmetry_holds_every_step() {
    for kind in ControllerKind::ALL {
        closed_loop(kind, 6000, |out| {
            assert_eq!(out.b.dp_fb, -out.a.dp_fb);
            assert_eq!(out.b.dp_ff, -out.a.dp_ff);
            assert_eq!(out.b.kp, -out.a.kp);
        });
    }
}

#[test]
fn references_and_commands_stay_in_limits() {
    let c = CascadeConfig::default();
    closed_loop(ControllerKind::PidAf, 6000, |out| {
        for d in [out.a, out.b] {
            assert!(d.pd >= c.pd_limits.0 && d.pd <= c.pd_limits.1);
        }
        for u in [out.u_a, out.u_b] {
            assert!(u >= c.u_limits.0 && u <= c.u_limits.1);
        }
    });
}

#[test]
fn diagnostic_streams_are_deterministic() {
    let mut first = Vec::new();
    closed_loop(ControllerKind::PidAf, 3000, |o| first.push(*o));
    let mut second = Vec::new();
    closed_loop(ControllerKind::PidAf, 3000, |o| second.push(*o));
    assert_eq!(first, second);
}

#[test]
fn ff_and_pid_kinds_hold_gain() {
    let kp0 = AdaptiveParams::default().kp0;
    closed_loop(ControllerKind::Pid, 3000, |o| {
        assert_eq!(o.a.dp_ff, 0.0);
        assert_eq!(o.a.kp, kp0);
    });
    closed_loop(ControllerKind::PidFf, 3000, |o| assert_eq!(o.a.kp, kp0));
}
