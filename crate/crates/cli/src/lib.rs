//! Command-line front end for the mixedbias library.
//!
//! Three commands share one configuration surface: `estimate` computes the
//! estimator bundle on a dataset, `verify` additionally checks the algebraic
//! collapse identities and fails the process when they do not hold, and
//! `simulate` runs seeded Monte Carlo replications against analytic truths.
//! Datasets come from numeric CSV files or from the built-in
//! data-generating processes; reports are JSON with round-trippable floats.

pub mod config;
pub mod csv;
pub mod error;
pub mod report;
pub mod runner;

pub use config::{resolve, CliOverrides, Command, RunConfig};
pub use csv::load_csv;
pub use error::{CliError, EXIT_CONFIG, EXIT_DATA, EXIT_IDENTITY_FAILURE};
pub use report::{to_json, Meta, Report};
pub use runner::run;
