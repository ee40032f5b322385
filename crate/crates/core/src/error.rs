use std::fmt;

use crate::experiment::DipFit;

pub type Result<T> = std::result::Result<T, Error>;

/// A single finding from a validation pass.
#[derive(Debug, Clone, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
pub struct Diagnostic {
    pub kind: DiagnosticKind,
    pub message: String,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DiagnosticKind {
    OutOfWindow,
    ExceedsMaxRoundtrips,
    DuplicateExtraction,
    SwitchingTooSlow,
    Interlacing,
    MissingInput,
    InvalidCoin,
    NonHardwareCoin,
    InvalidConfig,
    InvalidScenario,
}

impl Diagnostic {
    pub fn new(kind: DiagnosticKind, message: impl Into<String>) -> Self {
        Self {
            kind,
            message: message.into(),
        }
    }
}

impl fmt::Display for Diagnostic {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:?}: {}", self.kind, self.message)
    }
}

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("dimension mismatch: {left} vs {right}")]
    Dimension { left: usize, right: usize },

    #[error("bin {bin} outside window of size {window}")]
    Bounds { bin: usize, window: usize },

    #[error("degenerate input: {0}")]
    Degenerate(String),

    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: String, reason: String },

    #[error(
        "H amplitude at bin {bin} would leave the window of size {window} at roundtrip {roundtrip}"
    )]
    WindowOverflow {
        bin: usize,
        window: usize,
        roundtrip: usize,
    },

    #[error("validation failed: {}", format_diagnostics(.0))]
    Validation(Vec<Diagnostic>),

    #[error("target needs {required} roundtrips but at most {max} are allowed")]
    Infeasible { required: usize, max: usize },

    #[error("unachievable: {0}")]
    Unachievable(String),

    #[error("undefined correlation: {0}")]
    UndefinedCorrelation(String),

    #[error("undefined normalization: reference visibility {0} is not positive")]
    UndefinedNormalization(f64),

    #[error("fit failed: {reason}")]
    FitFailure { reason: String, last: Box<DipFit> },

    #[error("I/O error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },

    #[error("malformed input: {0}")]
    Parse(String),
}

fn format_diagnostics(diags: &[Diagnostic]) -> String {
    diags
        .iter()
        .map(|d| d.to_string())
        .collect::<Vec<_>>()
        .join("; ")
}

impl Error {
    pub(crate) fn invalid(name: &str, reason: impl Into<String>) -> Self {
        Error::InvalidParameter {
            name: name.to_string(),
            reason: reason.into(),
        }
    }

    pub(crate) fn io(path: impl AsRef<std::path::Path>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.as_ref().display().to_string(),
            source,
        }
    }
}

impl From<serde_json::Error> for Error {
    fn from(e: serde_json::Error) -> Self {
        Error::Parse(e.to_string())
    }
}

impl From<csv::Error> for Error {
    fn from(e: csv::Error) -> Self {
        if e.is_io_error() {
            if let csv::ErrorKind::Io(io) = e.into_kind() {
                return Error::io("<csv>", io);
            }
            unreachable!("is_io_error implies ErrorKind::Io");
        }
        Error::Parse(e.to_string())
    }
}
