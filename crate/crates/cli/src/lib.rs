//! Batch front end for `cordes-core`: configuration, run manifests, artifact
//! rendering and the verification suite.

pub mod commands;
pub mod config;
pub mod error;
pub mod manifest;
pub mod oracle;
pub mod output;
pub mod suite;

pub use commands::{execute, run};
pub use config::RunConfig;
pub use error::CliError;
pub use manifest::{Command, RunManifest};
