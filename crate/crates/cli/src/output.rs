use std::fs;
use std::io::{self, Write};
use std::path::{Path, PathBuf};

use clap::ValueEnum;
use serde::Serialize;
use thiserror::Error;

use crate::RunConfig;

#[derive(Copy, Clone, Debug, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Json,
    Csv,
}

#[derive(Debug, Error)]
pub enum CliError {
    #[error(transparent)]
    Core(#[from] cbnorm::Error),
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: io::Error },
    #[error("{path}: {source}")]
    Parse { path: PathBuf, source: serde_json::Error },
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error("{0}")]
    Usage(String),
}

impl CliError {
    /// 2 for invalid input or failed validation, 3 for an exceeded cap,
    /// 4 for a violated certified bound.
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Core(cbnorm::Error::CapExceeded { .. }) => 3,
            CliError::Core(cbnorm::Error::BoundViolation(_)) => 4,
            _ => 2,
        }
    }
}

pub type CliResult<T> = Result<T, CliError>;

pub fn read_json<T: serde::de::DeserializeOwned>(path: &Path) -> CliResult<T> {
    let text = fs::read_to_string(path).map_err(|source| CliError::Io { path: path.into(), source })?;
    serde_json::from_str(&text).map_err(|source| CliError::Parse { path: path.into(), source })
}

pub fn write_file(path: &Path, bytes: &[u8]) -> CliResult<()> {
    fs::write(path, bytes).map_err(|source| CliError::Io { path: path.into(), source })
}

/// Writes `document` as pretty JSON or `rows` as CSV, to `--out` or stdout.
pub fn emit<D: Serialize, R: Serialize>(cfg: &RunConfig, document: &D, rows: &[R]) -> CliResult<()> {
    let bytes = match cfg.format {
        Format::Json => {
            let mut s = serde_json::to_string_pretty(document).expect("serializable report");
            s.push('\n');
            s.into_bytes()
        }
        Format::Csv => {
            let mut w = csv::Writer::from_writer(Vec::new());
            for r in rows {
                w.serialize(r)?;
            }
            w.into_inner().map_err(|e| CliError::Usage(e.to_string()))?
        }
    };
    match &cfg.out {
        Some(path) => write_file(path, &bytes),
        None => {
            let stdout = io::stdout();
            let mut lock = stdout.lock();
            lock.write_all(&bytes)
                .and_then(|_| lock.flush())
                .map_err(|source| CliError::Io { path: "<stdout>".into(), source })
        }
    }
}
