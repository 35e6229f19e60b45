//! Demonstration references, each one cycle repeated three times so that
//! the middle cycle can be analysed free of start-up transients.

use crate::error::{Error, Result};
use crate::signal::{ReferenceSpec, Segment, Sinusoid, Tone};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DemoReference {
    /// 8 s sinusoids of amplitude 10°, 20° and 25° about 30°, back to back.
    Mixed,
    /// Ramp up, hold, ramp down, hold between 10° and 50°.
    RampHold,
    /// Two-tone sinusoid followed by a ramp-hold excursion.
    Compound,
}

impl std::str::FromStr for DemoReference {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "demo-mixed" | "mixed" => Ok(DemoReference::Mixed),
            "demo-ramp-hold" | "ramp-hold" => Ok(DemoReference::RampHold),
            "demo-compound" | "compound-demo" => Ok(DemoReference::Compound),
            other => Err(Error::config("reference", other, "unknown demo reference")),
        }
    }
}

impl DemoReference {
    pub const ALL: [DemoReference; 3] = [
        DemoReference::Mixed,
        DemoReference::RampHold,
        DemoReference::Compound,
    ];

    pub fn name(self) -> &'static str {
        match self {
            DemoReference::Mixed => "demo-mixed",
            DemoReference::RampHold => "demo-ramp-hold",
            DemoReference::Compound => "demo-compound",
        }
    }

    /// One cycle of the reference.
    pub fn cycle(self) -> Vec<Segment> {
        match self {
            DemoReference::Mixed => [10.0, 20.0, 25.0]
                .iter()
                .map(|a| Segment::Sinusoid(Sinusoid::new(30.0, *a, 8.0, 1)))
                .collect(),
            DemoReference::RampHold => vec![
                Segment::Hold {
                    value: 10.0,
                    duration: 1.0,
                },
                Segment::Ramp {
                    from: 10.0,
                    to: 50.0,
                    duration: 4.0,
                },
                Segment::Hold {
                    value: 50.0,
                    duration: 2.0,
                },
                Segment::Ramp {
                    from: 50.0,
                    to: 10.0,
                    duration: 4.0,
                },
                Segment::Hold {
                    value: 10.0,
                    duration: 1.0,
                },
            ],
            DemoReference::Compound => vec![
                Segment::MultiSine {
                    centroid: 30.0,
                    tones: vec![
                        Tone {
                            amplitude: 15.0,
                            period: 4.0,
                            phase: 0.0,
                        },
                        Tone {
                            amplitude: 8.0,
                            period: 1.5,
                            phase: 0.0,
                        },
                    ],
                    duration: 12.0,
                },
                Segment::Ramp {
                    from: 30.0,
                    to: 45.0,
                    duration: 2.0,
                },
                Segment::Hold {
                    value: 45.0,
                    duration: 2.0,
                },
                Segment::Ramp {
                    from: 45.0,
                    to: 30.0,
                    duration: 2.0,
                },
            ],
        }
    }

    pub fn cycle_duration(self) -> f64 {
        self.cycle().iter().map(Segment::duration).sum()
    }

    /// The cycle applied three times.
    pub fn spec(self) -> ReferenceSpec {
        let one = self.cycle();
        ReferenceSpec::Compound {
            segments: one.iter().chain(&one).chain(&one).cloned().collect(),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::harness::default_window;
    use crate::metrics::WindowProtocol;
    use crate::signal::gen_reference;

    #[test]
    fn demos_are_continuous_and_in_range() {
        for d in DemoReference::ALL {
            let spec = d.spec();
            spec.validate().unwrap();
            let (lo, hi) = spec.bounds();
            assert!(lo >= 0.0 && hi <= 60.0, "{d:?}: [{lo}, {hi}]");
            let total = spec.duration().unwrap();
            assert!((total - 3.0 * d.cycle_duration()).abs() < 1e-9);
            let dt = 0.002;
            let mut prev = gen_reference(&spec, 0.0);
            for k in 1..(total / dt) as usize {
                let v = gen_reference(&spec, k as f64 * dt);
                assert!((v - prev).abs() < 0.5, "{d:?} jumps at {}", k as f64 * dt);
                prev = v;
            }
            assert_eq!(
                default_window(&spec),
                Some((WindowProtocol::Demo3Cycle, d.cycle_duration()))
            );
        }
    }
}
