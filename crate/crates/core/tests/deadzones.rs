use proptest::prelude::*;

use pamctl::control::CascadeConfig;
use pamctl::harness::{run_hysteresis, DeadzoneSettings};
use pamctl::hysteresis::{
    detect_deadzones, extract_loops, run_hysteresis_protocol, Direction, HysteresisLoop, Protocol,
};
use pamctl::plant::{play_operator_step, PlantParams};

const DT: f64 = 0.002;

fn quiet_plant() -> PlantParams {
    PlantParams::default().without_noise()
}

fn play_loop(radius: f64, peak: f64, n: usize) -> HysteresisLoop {
    let mut z = 0.0;
    let mut lp = HysteresisLoop {
        cycle_index: 0,
        t: Vec::new(),
        pressure: Vec::new(),
        angle: Vec::new(),
        direction: Vec::new(),
    };
    for i in 0..n {
        let half = n / 2;
        let (p, d) = if i < half {
            (peak * i as f64 / half as f64, Direction::Ascending)
        } else {
            (peak * (n - i) as f64 / half as f64, Direction::Descending)
        };
        z = play_operator_step(z, p, radius);
        lp.t.push(i as f64);
        lp.pressure.push(p);
        lp.angle.push(0.1 * z);
        lp.direction.push(d);
    }
    lp
}

/// Flag rule written out from raw sums, independent of the library's
/// centred regression.
fn oracle_flags(lp: &HysteresisLoop, g: f64, pt: f64, w: usize) -> Vec<bool> {
    let pmax = lp.pressure.iter().copied().fold(f64::MIN, f64::max);
    let pmin = lp.pressure.iter().copied().fold(f64::MAX, f64::min);
    let amax = lp.angle.iter().copied().fold(f64::MIN, f64::max);
    let amin = lp.angle.iter().copied().fold(f64::MAX, f64::min);
    let grad_ave = (amax - amin) / (pmax - pmin);
    (0..lp.len())
        .map(|i| {
            let lo = i.saturating_sub(w);
            let hi = (i + w).min(lp.len() - 1);
            let xs = &lp.pressure[lo..=hi];
            let ys = &lp.angle[lo..=hi];
            let n = xs.len() as f64;
            let (sx, sy) = (xs.iter().sum::<f64>(), ys.iter().sum::<f64>());
            let sxy: f64 = xs.iter().zip(ys).map(|(x, y)| x * y).sum();
            let sxx: f64 = xs.iter().map(|x| x * x).sum();
            let spread = xs.iter().copied().fold(f64::MIN, f64::max)
                - xs.iter().copied().fold(f64::MAX, f64::min);
            let slope = if spread < 0.1 {
                0.0
            } else {
                (n * sxy - sx * sy) / (n * sxx - sx * sx)
            };
            let p = lp.pressure[i];
            slope.abs() < g * grad_ave && (p - 0.5 * (pmax + pmin)).abs() / (pmax - pmin) > pt
        })
        .collect()
}

#[test]
fn radius_fifty_loop_matches_oracle() {
    let lp = play_loop(50.0, 200.0, 1000);
    let rep = detect_deadzones(&lp, 0.3, 0.2, 10).unwrap();
    assert_eq!(rep.flags, oracle_flags(&lp, 0.3, 0.2, 10));
    // descending from 200 the output holds until p = 100; the band above 140 is flagged
    assert!((rep.red_width() - 60.0).abs() <= 6.0, "{}", rep.red_width());
    // ascending from 0 the output holds until p = 50
    assert!(
        (rep.blue_width() - 50.0).abs() <= 6.0,
        "{}",
        rep.blue_width()
    );
}

#[test]
fn protocol_a_runs_and_flags_every_loop() {
    let (run, an) = run_hysteresis(
        &quiet_plant(),
        &CascadeConfig::default(),
        Protocol::A,
        DT,
        DeadzoneSettings::default(),
    )
    .unwrap();
    assert!(an.loops.len() >= 2);
    for r in &an.reports {
        assert!(!r.zones.is_empty());
        assert!(r.grad_ave > 0.0);
    }
    // first ascent reaches 420 kPa before the first descent starts
    let t1 = run.vertex_times[1];
    let peak = run
        .t
        .iter()
        .zip(&run.pressure)
        .filter(|(t, _)| **t <= t1 + 0.05)
        .map(|(_, p)| *p)
        .fold(f64::MIN, f64::max);
    assert!((peak - 420.0).abs() <= 2.0, "{peak}");
    assert!(run.pressure_b.iter().all(|p| p.abs() <= 2.0));
    // each loop's pressure maximum matches its enclosing vertex
    for lp in &an.loops {
        let top = run.vertex_pressures[2 * lp.cycle_index + 1];
        let max = lp.pressure.iter().copied().fold(f64::MIN, f64::max);
        assert!(
            (max - top).abs() <= 2.0,
            "loop {}: {max} vs {top}",
            lp.cycle_index
        );
    }
    assert_eq!(an.widths_non_decreasing(), Some(true));
}

#[test]
fn protocol_b_rezeroes_angle() {
    let run = run_hysteresis_protocol(&quiet_plant(), &CascadeConfig::default(), Protocol::B, DT)
        .unwrap();
    let min = run.angle.iter().copied().fold(f64::INFINITY, f64::min);
    assert_eq!(min, 0.0);
    assert!(run.pressure_b.iter().all(|p| p.abs() <= 2.0));
}

#[test]
fn lag_only_plant_flags_just_the_reversals() {
    // without play operators the only loop opening comes from the angle lag
    let plant = PlantParams::single_radius(0.0).without_noise();
    let (_, an) = run_hysteresis(
        &plant,
        &CascadeConfig::default(),
        Protocol::A,
        DT,
        DeadzoneSettings::default(),
    )
    .unwrap();
    assert!(an.loops.len() >= 2);
    for (lp, rep) in an.loops.iter().zip(&an.reports) {
        let lo = lp.pressure.iter().copied().fold(f64::MAX, f64::min);
        let hi = lp.pressure.iter().copied().fold(f64::MIN, f64::max);
        for (p, f) in lp.pressure.iter().zip(&rep.flags) {
            if *f {
                assert!(
                    p - lo < 45.0 || hi - p < 45.0,
                    "flag at {p} in [{lo}, {hi}]"
                );
            }
        }
    }
}

#[test]
fn linear_loop_flags_nothing() {
    let lp = play_loop(0.0, 300.0, 800);
    let rep = detect_deadzones(&lp, 0.3, 0.2, 10).unwrap();
    assert_eq!(rep.flagged_count(), 0);
    assert!((rep.grad_ave - 0.1).abs() < 1e-12);
}

#[test]
fn five_vertices_two_loops() {
    let t: Vec<f64> = (0..=400).map(|k| k as f64 * 0.01).collect();
    let p: Vec<f64> = t
        .iter()
        .map(|x| 100.0 * (1.0 - (x - 1.0).abs().min(1.0)))
        .collect();
    let loops = extract_loops(
        &t,
        &p,
        &p,
        &[0.0, 1.0, 2.0, 3.0, 4.0],
        &[0.0, 100.0, 0.0, 100.0, 0.0],
    )
    .unwrap();
    assert_eq!(loops.len(), 2);
    assert!(extract_loops(&t, &p, &p, &[], &[]).is_err());
}

fn random_loop() -> impl Strategy<Value = HysteresisLoop> {
    // radius below the peak so the angle always moves
    (0.0f64..0.9, 60.0f64..400.0, 100usize..600)
        .prop_map(|(f, peak, n)| play_loop(f * peak, peak, n))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn thresholds_are_monotone(lp in random_loop(), g in 0.05f64..0.9, dg in 0.0f64..0.5, pt in 0.0f64..0.45, dpt in 0.0f64..0.1) {
        let base = detect_deadzones(&lp, g, pt, 10).unwrap();
        let looser = detect_deadzones(&lp, g + dg, pt, 10).unwrap();
        let stricter = detect_deadzones(&lp, g, pt + dpt, 10).unwrap();
        for i in 0..lp.len() {
            prop_assert!(!base.flags[i] || looser.flags[i]);
            prop_assert!(!stricter.flags[i] || base.flags[i]);
        }
    }

    #[test]
    fn average_gradient_is_positive(lp in random_loop()) {
        let rep = detect_deadzones(&lp, 0.3, 0.2, 10).unwrap();
        prop_assert!(rep.grad_ave > 0.0);
    }
}
