//! Config-driven runs, parameter sweeps, theory diagnostics and SVG charts
//! on top of `dse-core`.

// `!(x > 0.0)` style checks are deliberate: they also reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod checkpoint;
pub mod config;
pub mod error;
pub mod plot;
pub mod run;
pub mod sweep;
pub mod validate;

pub use config::{parse_config, parse_config_str, prepare, Prepared, RunConfig};
pub use error::{HarnessError, Result};
pub use run::{execute, run, Execution, RunReport};
pub use sweep::{parse_sweep, sweep, SweepSpec};
