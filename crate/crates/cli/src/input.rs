//! File reading, error classification and artifact output.

use std::io::Write;
use std::path::{Path, PathBuf};

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use serde_json::json;

use heatctl_core::{BoxUnionSet, Error};

pub const EXIT_OTHER: u8 = 1;
pub const EXIT_INPUT: u8 = 3;
pub const EXIT_HYPOTHESIS: u8 = 4;
pub const EXIT_NUMERICAL: u8 = 5;

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("cannot read {path}: {source}")]
    Read { path: PathBuf, source: std::io::Error },

    #[error("{path}:{line}:{column}: {message}")]
    Parse { path: PathBuf, line: usize, column: usize, message: String },

    #[error("cannot write {path}: {message}")]
    Write { path: String, message: String },

    #[error("{0}")]
    Usage(String),

    #[error(transparent)]
    Core(#[from] Error),
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Read { .. } | CliError::Parse { .. } => EXIT_INPUT,
            CliError::Usage(_) => 2,
            CliError::Write { .. } => EXIT_OTHER,
            CliError::Core(e) => match e {
                Error::HypothesisViolation(_) => EXIT_HYPOTHESIS,
                Error::NumericalFailure { .. } | Error::IndeterminateRatio(_) => EXIT_NUMERICAL,
                Error::Io(_) => EXIT_OTHER,
                _ => EXIT_INPUT,
            },
        }
    }

    fn kind(&self) -> &'static str {
        match self {
            CliError::Read { .. } => "read",
            CliError::Parse { .. } => "parse",
            CliError::Write { .. } => "write",
            CliError::Usage(_) => "usage",
            CliError::Core(e) => e.kind(),
        }
    }

    pub fn to_json(&self) -> String {
        let mut err = json!({
            "kind": self.kind(),
            "message": self.to_string(),
            "exit_code": self.exit_code(),
        });
        if let CliError::Parse { path, line, column, .. } = self {
            err["path"] = json!(path);
            err["line"] = json!(line);
            err["column"] = json!(column);
        }
        json!({ "error": err }).to_string()
    }
}

pub fn read_json<T: DeserializeOwned>(path: &Path) -> Result<T, CliError> {
    let text = std::fs::read_to_string(path).map_err(|source| CliError::Read { path: path.to_path_buf(), source })?;
    serde_json::from_str(&text).map_err(|e| CliError::Parse {
        path: path.to_path_buf(),
        line: e.line(),
        column: e.column(),
        message: e.to_string(),
    })
}

/// A set given inline or as a path relative to the referencing file.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(untagged)]
pub enum SetRef {
    Path(PathBuf),
    Inline(BoxUnionSet),
}

impl SetRef {
    pub fn resolve(&self, base: &Path) -> Result<BoxUnionSet, CliError> {
        match self {
            SetRef::Inline(s) => Ok(s.clone()),
            SetRef::Path(p) => {
                let full = if p.is_absolute() { p.clone() } else { base.parent().unwrap_or(Path::new(".")).join(p) };
                read_json(&full)
            }
        }
    }
}

fn write_err(path: Option<&Path>, e: impl ToString) -> CliError {
    CliError::Write { path: path.map_or_else(|| "stdout".into(), |p| p.display().to_string()), message: e.to_string() }
}

/// Writes `text` to `path`, or to stdout.
pub fn emit_text(path: Option<&Path>, text: &str) -> Result<(), CliError> {
    match path {
        Some(p) => std::fs::write(p, text).map_err(|e| write_err(Some(p), e)),
        None => {
            let mut out = std::io::stdout().lock();
            out.write_all(text.as_bytes()).and_then(|_| out.flush()).map_err(|e| write_err(None, e))
        }
    }
}

/// `{"config": ..., "result": ...}`, pretty-printed.
pub fn emit_report(path: Option<&Path>, config: impl Serialize, result: impl Serialize) -> Result<(), CliError> {
    let report = json!({ "config": config, "result": result });
    let mut text = serde_json::to_string_pretty(&report).map_err(|e| write_err(path, e))?;
    text.push('\n');
    emit_text(path, &text)
}

pub fn write_csv(path: &Path, header: &[&str], rows: impl IntoIterator<Item = Vec<String>>) -> Result<(), CliError> {
    let err = |e: csv::Error| write_err(Some(path), e);
    let mut w = csv::Writer::from_path(path).map_err(err)?;
    w.write_record(header).map_err(err)?;
    for r in rows {
        w.write_record(&r).map_err(err)?;
    }
    w.flush().map_err(|e| write_err(Some(path), e))
}
