use proptest::prelude::*;

use pamctl::adaptforward::{
    compensator_step, gain_increment, update_gain, AdaptiveParams, CompensatorState,
};
use pamctl::signal::{gen_reference, pseudo_diff2_step, DiffPair, ReferenceSpec, Sinusoid};

/// Steps the law along a sampled sinusoid and returns `(t, kp/kp0)`.
fn gain_trace(period: f64, cycles: u32) -> Vec<(f64, f64)> {
    let p = AdaptiveParams::default();
    let spec = ReferenceSpec::Sinusoid(Sinusoid::new(30.0, 20.0, period, cycles));
    let mut diff = DiffPair::new(0.02);
    let mut st = CompensatorState::new(p.kp0);
    let n = (period * cycles as f64 / 0.002).round() as usize;
    (0..n)
        .map(|k| {
            let t = k as f64 * 0.002;
            let r = gen_reference(&spec, t);
            let (d1, d2) = pseudo_diff2_step(&mut diff, r, t).unwrap();
            let (_, kp) = compensator_step(&mut st, r, d1, d2, &p).unwrap();
            (t, kp / p.kp0)
        })
        .collect()
}

#[test]
fn faster_references_raise_the_peak_gain() {
    let peaks: Vec<f64> = [10.0, 8.0, 6.0, 4.0]
        .iter()
        .map(|&period| {
            gain_trace(period, 3)
                .into_iter()
                .filter(|(t, _)| *t >= period)
                .map(|(_, r)| r)
                .fold(0.0, f64::max)
        })
        .collect();
    for w in peaks.windows(2) {
        assert!(w[1] > w[0], "{peaks:?}");
    }
}

#[test]
fn one_turn_raises_then_restores_the_gain() {
    // 8 s sinusoid: the first maximum is at 2 s, the next zero crossing at 4 s
    let trace = gain_trace(8.0, 1);
    let before = trace
        .iter()
        .filter(|(t, _)| *t > 0.5 && *t < 2.0)
        .map(|x| x.1)
        .fold(0.0, f64::max);
    assert!(before > 1.0, "{before}");
    let peak_t = trace
        .iter()
        .filter(|(t, _)| *t < 4.0)
        .max_by(|a, b| a.1.total_cmp(&b.1))
        .unwrap()
        .0;
    assert!((peak_t - 2.0).abs() < 0.5, "{peak_t}");
    let end = trace.iter().find(|(t, _)| *t >= 3.9).unwrap().1;
    assert_eq!(end, 1.0);
}

#[test]
fn boundary_damping() {
    let p = AdaptiveParams::default();
    let near_zero = gain_increment(1e-9, 6.0, -3.2e4, &p).unwrap();
    let near_cap = gain_increment(p.theta_cap - 1e-9, 6.0, 5.0e4, &p).unwrap();
    assert!(near_zero.abs() < 1e-10 && near_cap.abs() < 1e-10);
    assert_eq!(gain_increment(0.0, 6.0, -3.2e4, &p).unwrap(), 0.0);
}

#[test]
fn update_gain_examples() {
    let mut s = CompensatorState::new(0.08);
    update_gain(&mut s, 0.075, 0.08);
    assert!((s.kp_current - 0.155).abs() < 1e-15);
    let mut s = CompensatorState::new(0.08);
    update_gain(&mut s, -0.01, 0.08);
    assert_eq!(s.kp_current, 0.08);
    update_gain(&mut s, 0.0, 0.08);
    assert_eq!(s.kp_current, 0.08);
}

proptest! {
    #[test]
    fn floor_sign_and_bound(
        steps in prop::collection::vec((0.0f64..=60.0, -500.0f64..500.0, -3.0e5f64..3.0e5), 1..300),
    ) {
        let p = AdaptiveParams::default();
        let mut st = CompensatorState::new(p.kp0);
        for (theta, rate, accel) in steps {
            let d = gain_increment(theta, rate, accel, &p).unwrap();
            if rate.abs() > p.velocity_deadband {
                if rate * accel < 0.0 { prop_assert!(d >= 0.0); }
                if rate * accel > 0.0 { prop_assert!(d <= 0.0); }
            }
            let bound = if accel < 0.0 { p.bound_decel() } else { p.bound_accel() };
            prop_assert!(d.abs() <= bound);
            update_gain(&mut st, d, p.kp0);
            prop_assert!(st.kp_current >= p.kp0);
        }
    }

    #[test]
    fn stationary_reference_is_inert(theta in 0.0f64..=60.0, kp in 0.08f64..1.0) {
        let p = AdaptiveParams::default();
        let mut st = CompensatorState { kp_current: kp };
        let (ff, live) = compensator_step(&mut st, theta, 0.0, 0.0, &p).unwrap();
        prop_assert_eq!(ff, 0.0);
        prop_assert_eq!(live, kp);
    }
}
