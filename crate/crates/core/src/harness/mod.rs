//! Configuration-driven experiment runner.
//!
//! A run reads one flat `key = value` file (dotted namespaces such as
//! `spin.beta`), evaluates every sweep point, appends CSV rows in sweep
//! order and writes a JSON [`RunReport`] with fits and named gates.

mod config;
mod plot;
mod report;
mod run;

pub use config::{ExperimentConfig, ExperimentKind};
pub use plot::emit_plot;
pub use report::{FitSummary, Gate, ReportRow, RunMeta, RunReport};
pub use run::{kernel_from_config, run, test_function_from_config, RunOptions};
