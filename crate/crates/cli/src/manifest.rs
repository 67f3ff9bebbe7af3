use std::path::PathBuf;

use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::config::RunConfig;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, clap::ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum Command {
    Exponents,
    Radial,
    Linear,
    Kernel,
    Norms,
    PerturbZero,
    PerturbDomain,
    Verify,
}

impl Command {
    pub fn name(self) -> &'static str {
        match self {
            Command::Exponents => "exponents",
            Command::Radial => "radial",
            Command::Linear => "linear",
            Command::Kernel => "kernel",
            Command::Norms => "norms",
            Command::PerturbZero => "perturb-zero",
            Command::PerturbDomain => "perturb-domain",
            Command::Verify => "verify",
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct Versions {
    pub code: String,
    pub config: String,
}

/// Everything that determines the output of a run.
#[derive(Debug, Clone, Serialize)]
pub struct RunManifest {
    pub command: Command,
    pub config_path: Option<PathBuf>,
    pub seed: u64,
    pub output_dir: PathBuf,
    pub versions: Versions,
    /// Effective configuration after merging file and flags.
    pub config: RunConfig,
}

pub const DEFAULT_SEED: u64 = 7;

impl RunManifest {
    pub fn new(command: Command, config_path: Option<PathBuf>, config: RunConfig, output_dir: PathBuf) -> Self {
        let seed = config.seed.unwrap_or(DEFAULT_SEED);
        let config = RunConfig {
            seed: Some(seed),
            ..config
        };
        let canonical = serde_json::to_vec(&(command, &config)).expect("config serializes");
        Self {
            command,
            config_path,
            seed,
            output_dir,
            versions: Versions {
                code: code_hash(),
                config: hex(&Sha256::digest(&canonical)),
            },
            config,
        }
    }
}

fn hex(bytes: &[u8]) -> String {
    bytes.iter().map(|b| format!("{b:02x}")).collect()
}

/// Hash of the running executable, or of the package version if it cannot be read.
fn code_hash() -> String {
    let mut h = Sha256::new();
    match std::env::current_exe().and_then(std::fs::read) {
        Ok(bytes) => h.update(&bytes),
        Err(_) => h.update(concat!(env!("CARGO_PKG_NAME"), " ", env!("CARGO_PKG_VERSION")).as_bytes()),
    }
    hex(&h.finalize())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn config_hash_tracks_content_and_seed() {
        let c = RunConfig {
            n: Some(4),
            gamma: Some(1.0),
            ..Default::default()
        };
        let a = RunManifest::new(Command::Exponents, None, c.clone(), "x".into());
        let b = RunManifest::new(Command::Exponents, None, c.clone(), "y".into());
        assert_eq!(a.versions.config, b.versions.config);
        let s = RunManifest::new(Command::Exponents, None, RunConfig { seed: Some(8), ..c }, "x".into());
        assert_ne!(a.versions.config, s.versions.config);
        assert_eq!(a.seed, DEFAULT_SEED);
    }
}
