//! Experiment orchestration: runs, comparisons, sweeps, hysteresis
//! protocols, config files and output emission.

mod analysis;
mod config;
mod demo;
mod output;
mod plan;
mod run;

pub use analysis::*;
pub use config::*;
pub use demo::*;
pub use output::*;
pub use plan::*;
pub use run::*;
