//! Cascaded PID control of a simulated dual-muscle pneumatic bending
//! actuator, with a feedforward term and an adaptive proportional gain that
//! anticipate hysteresis dead-zones at reference turning points.

// `!(x > 0.0)` is used on purpose so that NaN fails validation
#![allow(clippy::neg_cmp_op_on_partial_ord)]
pub mod adaptforward;
pub mod control;
pub mod error;
pub mod harness;
pub mod hysteresis;
pub mod metrics;
pub mod par;
pub mod plant;
pub mod signal;
pub mod types;

pub use error::{Error, Result};
pub use par::Execution;
pub use types::{ControllerKind, RunConfig, Sample, TimeSeries};
