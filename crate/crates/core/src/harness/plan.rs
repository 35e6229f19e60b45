//! What to run, independent of how results are written.

use crate::error::{Error, Result};
use crate::hysteresis::Protocol;
use crate::types::{validate_config, ControllerKind, RunConfig};

use super::config::Settings;
use super::run::SweepMode;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PlanKind {
    Single,
    Compare,
    Sweep(SweepMode),
    Hysteresis(Protocol),
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentPlan {
    pub kind: PlanKind,
    pub base: RunConfig,
    /// Amplitudes in degrees or periods in seconds; used by sweeps only.
    pub sweep_values: Vec<f64>,
    pub controllers: Vec<ControllerKind>,
}

impl ExperimentPlan {
    /// Builds a plan from parsed settings. Sweeps fall back to the default
    /// value list when the settings carry none. A single run uses the
    /// configured controller only.
    pub fn from_settings(kind: PlanKind, settings: &Settings) -> Result<Self> {
        let sweep_values = match kind {
            PlanKind::Sweep(mode) => settings
                .sweep_values
                .clone()
                .unwrap_or_else(|| mode.default_values()),
            _ => Vec::new(),
        };
        let controllers = match kind {
            PlanKind::Single => vec![settings.run.controller_kind],
            _ => settings.controllers.clone(),
        };
        let plan = ExperimentPlan {
            kind,
            base: settings.run.clone(),
            sweep_values,
            controllers,
        };
        plan.validate()?;
        Ok(plan)
    }

    pub fn validate(&self) -> Result<()> {
        if self.controllers.is_empty() {
            return Err(Error::config(
                "controllers",
                "[]",
                "at least one controller is required",
            ));
        }
        match self.kind {
            PlanKind::Sweep(_) => {
                if self.sweep_values.is_empty() {
                    return Err(Error::config(
                        "sweep.values",
                        "[]",
                        "sweep needs at least one value",
                    ));
                }
                if let Some(v) = self.sweep_values.iter().find(|v| !(**v > 0.0)) {
                    return Err(Error::config(
                        "sweep.values",
                        v,
                        "sweep values must be positive",
                    ));
                }
                validate_config(self.base.clone())?;
            }
            // the protocol drives pressure directly; only plant and cascade matter
            PlanKind::Hysteresis(_) => {
                self.base.plant.validate()?;
                self.base.cascade.validate()?;
            }
            PlanKind::Single | PlanKind::Compare => {
                validate_config(self.base.clone())?;
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sweeps_get_default_values() {
        let st = Settings::default();
        let p = ExperimentPlan::from_settings(PlanKind::Sweep(SweepMode::Frequency), &st).unwrap();
        assert_eq!(p.sweep_values, vec![10.0, 8.0, 6.0, 4.0, 2.0]);
        let p = ExperimentPlan::from_settings(PlanKind::Single, &st).unwrap();
        assert_eq!(p.controllers, vec![ControllerKind::PidAf]);
    }

    #[test]
    fn empty_sweep_rejected() {
        let st = Settings {
            sweep_values: Some(vec![]),
            ..Settings::default()
        };
        let e =
            ExperimentPlan::from_settings(PlanKind::Sweep(SweepMode::Amplitude), &st).unwrap_err();
        assert_eq!(e.exit_code(), 2);
        let st = Settings {
            controllers: vec![],
            ..Settings::default()
        };
        assert!(ExperimentPlan::from_settings(PlanKind::Compare, &st).is_err());
    }
}
