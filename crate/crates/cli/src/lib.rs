//! Config-driven experiment runner for the `visclimit` solvers.
//!
//! A run is described by a flat `key = value` file ([`config`]), executed by
//! one of the [`experiments`], and leaves CSV/JSON artifacts plus the fully
//! resolved `effective.cfg` in its output directory ([`io`]).

pub mod config;
pub mod experiments;
pub mod io;

pub use config::{parse_config, ConfigError, Experiment, Profile, RunConfig};
pub use experiments::{execute, CliError, Outcome};
