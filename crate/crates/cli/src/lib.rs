//! Command-line front end: run configurations, transformation chains with
//! oracle checks, CSV bundles and manifests.

pub mod bundle;
pub mod config;
pub mod error;
pub mod figure;
pub mod manifest;
pub mod run;

pub use config::{Mode, RawConfig, RunConfig};
pub use error::{CliError, Result};
pub use manifest::{Manifest, Outcome, Status};
