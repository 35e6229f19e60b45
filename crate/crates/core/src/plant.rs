//! Simulated dual-muscle bending actuator.
//!
//! Each chamber integrates its valve command into pressure. The differential
//! pressure drives a weighted bank of play operators whose sum is the
//! quasi-static bending angle; the measured angle follows it through a
//! first-order lag. Gaussian sensor noise is drawn from a seeded generator.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Full pressurization used for the static calibration check, kPa.
pub const CALIBRATION_PRESSURE: f64 = 420.0;
/// Accepted static angle at [`CALIBRATION_PRESSURE`], degrees.
pub const CALIBRATION_RANGE: (f64, f64) = (50.0, 62.0);

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlantParams {
    /// kPa/(s·V)
    pub k_valve: f64,
    /// V
    pub u_neutral: f64,
    /// kPa
    pub p_limits: (f64, f64),
    /// kPa, strictly increasing, first entry 0.
    pub play_radii: Vec<f64>,
    /// deg/kPa, one per radius.
    pub play_weights: Vec<f64>,
    /// s
    pub tau_theta: f64,
    /// deg
    pub noise_sigma_theta: f64,
    /// kPa
    pub noise_sigma_p: f64,
    pub seed: u64,
}

impl Default for PlantParams {
    fn default() -> Self {
        PlantParams {
            k_valve: 1750.0,
            u_neutral: 5.0,
            p_limits: (0.0, 500.0),
            play_radii: vec![0.0, 45.0, 90.0, 180.0],
            play_weights: vec![0.03, 0.067, 0.014, 0.062],
            tau_theta: 0.35,
            noise_sigma_theta: 0.05,
            noise_sigma_p: 0.5,
            seed: 0,
        }
    }
}

impl PlantParams {
    /// A plant with a single play operator of radius `radius`, weighted so
    /// that the static calibration angle is 57°.
    pub fn single_radius(radius: f64) -> Self {
        let w = 57.0 / (CALIBRATION_PRESSURE - radius);
        PlantParams {
            play_radii: vec![radius],
            play_weights: vec![w],
            ..PlantParams::default()
        }
    }

    pub fn without_noise(mut self) -> Self {
        self.noise_sigma_theta = 0.0;
        self.noise_sigma_p = 0.0;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.k_valve > 0.0) {
            return Err(Error::config(
                "plant.k_valve",
                self.k_valve,
                "must be positive",
            ));
        }
        if !(self.p_limits.0 < self.p_limits.1) {
            return Err(Error::config(
                "plant.p_limits",
                format!("[{}, {}]", self.p_limits.0, self.p_limits.1),
                "low must be below high",
            ));
        }
        if !(self.tau_theta > 0.0) {
            return Err(Error::config(
                "plant.tau_theta",
                self.tau_theta,
                "must be positive",
            ));
        }
        if !(self.noise_sigma_theta >= 0.0) || !(self.noise_sigma_p >= 0.0) {
            return Err(Error::config(
                "plant.noise_sigma",
                format!("{}, {}", self.noise_sigma_theta, self.noise_sigma_p),
                "noise levels must be nonnegative",
            ));
        }
        let radii = &self.play_radii;
        if radii.is_empty() || radii.len() != self.play_weights.len() {
            return Err(Error::config(
                "plant.play_weights",
                self.play_weights.len(),
                "need one weight per radius and at least one radius",
            ));
        }
        if radii[0] != 0.0 && radii.len() > 1 {
            return Err(Error::config(
                "plant.play_radii",
                radii[0],
                "first radius must be 0",
            ));
        }
        if radii.iter().any(|r| !(*r >= 0.0)) || radii.windows(2).any(|w| !(w[0] < w[1])) {
            return Err(Error::config(
                "plant.play_radii",
                format!("{radii:?}"),
                "radii must be nonnegative and strictly increasing",
            ));
        }
        if self.play_weights.iter().any(|w| !(*w >= 0.0))
            || !self.play_weights.iter().any(|w| *w > 0.0)
        {
            return Err(Error::config(
                "plant.play_weights",
                format!("{:?}", self.play_weights),
                "weights must be nonnegative with at least one positive",
            ));
        }
        let gain = measure_static_gain(self, CALIBRATION_PRESSURE);
        if !(CALIBRATION_RANGE.0..=CALIBRATION_RANGE.1).contains(&gain) {
            return Err(Error::config(
                "plant.play_weights",
                format!("{gain:.3} deg at {CALIBRATION_PRESSURE} kPa"),
                "static calibration must lie in [50, 62] deg",
            ));
        }
        Ok(())
    }
}

/// Play (backlash) operator with threshold `radius`.
#[inline]
pub fn play_operator_step(z_prev: f64, input: f64, radius: f64) -> f64 {
    (input - radius).max((input + radius).min(z_prev))
}

/// Ascending-branch angle from the virgin state at differential pressure `dp`.
pub fn measure_static_gain(params: &PlantParams, dp: f64) -> f64 {
    params
        .play_radii
        .iter()
        .zip(&params.play_weights)
        .map(|(r, w)| w * (dp - r).max(0.0))
        .sum()
}

/// Noisy sensor readings.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Measurement {
    pub theta: f64,
    pub p_a: f64,
    pub p_b: f64,
}

#[derive(Debug, Clone)]
pub struct PlantState {
    pub p_a: f64,
    pub p_b: f64,
    pub play_states: Vec<f64>,
    pub theta_true: f64,
    rng: ChaCha8Rng,
}

impl PlantState {
    /// Both chambers at atmospheric pressure, straight actuator.
    pub fn new(params: &PlantParams) -> Self {
        PlantState {
            p_a: 0.0,
            p_b: 0.0,
            play_states: vec![0.0; params.play_radii.len()],
            theta_true: 0.0,
            rng: ChaCha8Rng::seed_from_u64(params.seed),
        }
    }

    /// Quasi-static angle of the operator bank.
    pub fn theta_hyst(&self, params: &PlantParams) -> f64 {
        self.play_states
            .iter()
            .zip(&params.play_weights)
            .map(|(z, w)| w * z)
            .sum()
    }

    /// Moves every play operator to differential pressure `dp`.
    pub fn apply_differential(&mut self, params: &PlantParams, dp: f64) {
        for (z, r) in self.play_states.iter_mut().zip(&params.play_radii) {
            *z = play_operator_step(*z, dp, *r);
        }
        debug_assert!(self
            .play_states
            .iter()
            .zip(&params.play_radii)
            .all(|(z, r)| (z - dp).abs() <= r + 1e-9 * (1.0 + dp.abs())));
    }

    /// Current readings with sensor noise.
    pub fn measure(&mut self, params: &PlantParams) -> Measurement {
        let mut noise = |sigma: f64| {
            if sigma > 0.0 {
                let n: f64 = StandardNormal.sample(&mut self.rng);
                sigma * n
            } else {
                0.0
            }
        };
        let n_theta = noise(params.noise_sigma_theta);
        let n_a = noise(params.noise_sigma_p);
        let n_b = noise(params.noise_sigma_p);
        Measurement {
            theta: self.theta_true + n_theta,
            p_a: self.p_a + n_a,
            p_b: self.p_b + n_b,
        }
    }
}

/// Advances the plant by `dt` under valve commands `u_a`, `u_b` and returns
/// the new readings.
pub fn plant_step(
    state: &mut PlantState,
    params: &PlantParams,
    u_a: f64,
    u_b: f64,
    dt: f64,
) -> Measurement {
    debug_assert!(dt > 0.0);
    let (lo, hi) = params.p_limits;
    state.p_a = (state.p_a + params.k_valve * (u_a - params.u_neutral) * dt).clamp(lo, hi);
    state.p_b = (state.p_b + params.k_valve * (u_b - params.u_neutral) * dt).clamp(lo, hi);
    state.apply_differential(params, state.p_a - state.p_b);
    let target = state.theta_hyst(params);
    let frac = (dt / params.tau_theta).min(1.0);
    state.theta_true += (target - state.theta_true) * frac;
    state.measure(params)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn play_operator_cases() {
        assert_eq!(play_operator_step(3.0, 7.5, 0.0), 7.5);
        assert_eq!(play_operator_step(0.0, 5.0, 20.0), 0.0);
        assert_eq!(play_operator_step(0.0, 30.0, 20.0), 10.0);
        assert_eq!(play_operator_step(0.0, -30.0, 20.0), -10.0);
    }

    #[test]
    fn static_gain_cases() {
        let p = PlantParams::default();
        assert_eq!(measure_static_gain(&p, 0.0), 0.0);
        let dp = p.play_radii.last().unwrap() + 1.0;
        let expect: f64 = p
            .play_radii
            .iter()
            .zip(&p.play_weights)
            .map(|(r, w)| w * (dp - r))
            .sum();
        assert_abs_diff_eq!(measure_static_gain(&p, dp), expect, epsilon = 1e-12);
        let g = measure_static_gain(&p, 420.0);
        assert!((50.0..=62.0).contains(&g), "{g}");
    }

    #[test]
    fn default_params_validate() {
        PlantParams::default().validate().unwrap();
        PlantParams::single_radius(0.0).validate().unwrap();
        let mut bad = PlantParams::default();
        bad.play_radii[2] = 20.0;
        assert!(bad.validate().is_err());
        let mut bad = PlantParams::default();
        bad.play_weights = vec![0.0; 5];
        assert!(bad.validate().is_err());
    }

    #[test]
    fn quiescent_plant_reads_noise_only() {
        let params = PlantParams::default();
        let mut s = PlantState::new(&params);
        let bound = 4.0 * params.noise_sigma_theta;
        for _ in 0..1000 {
            let m = plant_step(&mut s, &params, 5.0, 5.0, 0.002);
            assert!(m.theta.abs() <= bound, "{}", m.theta);
        }
        assert_eq!((s.p_a, s.p_b, s.theta_true), (0.0, 0.0, 0.0));
    }

    #[test]
    fn saturated_chamber_reaches_closed_form_angle() {
        let params = PlantParams::default().without_noise();
        let mut s = PlantState::new(&params);
        let dt = 0.002;
        let mut t = 0.0;
        while s.p_a < params.p_limits.1 {
            plant_step(&mut s, &params, 8.0, 5.0, dt);
            t += dt;
        }
        let settle = (10.0 * params.tau_theta / dt).ceil() as usize;
        let mut m = Measurement::default();
        for _ in 0..settle {
            m = plant_step(&mut s, &params, 8.0, 5.0, dt);
        }
        let expect = measure_static_gain(&params, 500.0);
        assert!(
            (m.theta - expect).abs() <= 0.01 * expect,
            "{} vs {expect} after {t}s",
            m.theta
        );
    }

    #[test]
    fn triangular_sweep_opens_a_loop() {
        let params = PlantParams::default().without_noise();
        let mut s = PlantState::new(&params);
        let mut up = None;
        for k in 0..=400 {
            s.apply_differential(&params, k as f64);
            if k == 200 {
                up = Some(s.theta_hyst(&params));
            }
        }
        let mut down = None;
        for k in (0..=400).rev() {
            s.apply_differential(&params, k as f64);
            if k == 200 {
                down = Some(s.theta_hyst(&params));
            }
        }
        let gap = down.unwrap() - up.unwrap();
        assert!(gap >= 2.0, "gap {gap}");
    }

    #[test]
    fn same_seed_same_measurements() {
        let params = PlantParams {
            seed: 9,
            ..PlantParams::default()
        };
        let mut a = PlantState::new(&params);
        let mut b = PlantState::new(&params);
        for k in 0..500 {
            let u = 5.0 + (k as f64 * 0.01).sin();
            assert_eq!(
                plant_step(&mut a, &params, u, 5.0, 0.002),
                plant_step(&mut b, &params, u, 5.0, 0.002)
            );
        }
    }
}
