//! Library side of the `kkmeans` binary: config parsing and one function per
//! subcommand, so tests can drive the commands without spawning a process.

pub mod commands;
pub mod config;
pub mod data;

use std::io;
use std::path::{Path, PathBuf};

pub use commands::{
    cmd_cluster, cmd_nystrom_embed, cmd_rad_check, cmd_risk_scan, cmd_spectrum, Outcome, Overrides, Status,
};
pub use config::ExperimentConfig;

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("config error: {0}")]
    Config(String),
    #[error("{}: {source}", path.display())]
    Io { path: PathBuf, source: io::Error },
    #[error(transparent)]
    Lib(#[from] kkmeans::Error),
}

impl CliError {
    pub fn io(path: &Path, source: io::Error) -> Self {
        CliError::Io {
            path: path.to_path_buf(),
            source,
        }
    }

    /// Always 2: config, IO and library errors share one status.
    pub fn exit_code(&self) -> i32 {
        2
    }
}
