use std::fmt;
use std::path::{Path, PathBuf};

use serde::Serialize;
use strength_ties::data::{read_games_file, RawGameRow};
use strength_ties::error::Error;
use strength_ties::report::{manifest_sidecar_path, write_json, RunManifest};

pub enum Status {
    Done,
    NotConverged(String),
}

/// An error tied to the file it came from.
#[derive(Debug)]
pub struct CliError {
    pub context: Option<PathBuf>,
    pub source: Error,
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match (&self.context, &self.source) {
            (Some(p), Error::Parse(e)) => write!(f, "{}: {e}", p.display()),
            (Some(p), Error::InvalidArgument(m)) => write!(f, "{}: {m}", p.display()),
            _ => write!(f, "{}", self.source),
        }
    }
}

impl From<Error> for CliError {
    fn from(source: Error) -> Self {
        Self { context: None, source }
    }
}

pub fn invalid(msg: impl Into<String>) -> CliError {
    Error::InvalidArgument(msg.into()).into()
}

pub fn in_file(path: &Path) -> impl FnOnce(Error) -> CliError + '_ {
    move |source| CliError {
        context: Some(path.to_owned()),
        source,
    }
}

pub fn read_games(path: &Path) -> Result<Vec<RawGameRow>, CliError> {
    read_games_file(path).map_err(in_file(path))
}

#[derive(Serialize)]
struct Sidecar<'a> {
    manifest: &'a RunManifest,
}

/// Writes the manifest next to a CSV output.
pub fn write_sidecar(csv_path: &Path, manifest: &RunManifest) -> Result<(), CliError> {
    Ok(write_json(manifest_sidecar_path(csv_path), &Sidecar { manifest })?)
}

pub fn write_text(path: &Path, text: &str) -> Result<(), CliError> {
    std::fs::write(path, text).map_err(|e| Error::io(path, e).into())
}
