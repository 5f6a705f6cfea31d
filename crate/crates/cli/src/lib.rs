//! Experiment front end for the `recmarl-core` learners: TOML-configured
//! runs over seed lists, CSV/JSON metric files, certification suites, and
//! SVG reward plots. The binary in this crate wires these modules to a
//! `run` / `verify` / `plot` command line; everything is also callable as a
//! library, which is how the integration tests drive full experiments.

pub mod config;
pub mod error;
pub mod output;
pub mod plot;
pub mod runner;
pub mod verify;

pub use error::CliError;
