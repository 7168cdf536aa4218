use std::fmt;
use std::io;
use std::path::PathBuf;

pub type Result<T> = std::result::Result<T, Error>;

/// All failure modes surfaced by this crate.
///
/// Recoverable per-record problems (skipped XML rows, orphan answers) are
/// counted by the ingestion types instead of being raised here; an `Error`
/// always means the current operation cannot produce a valid result.
#[derive(Debug)]
pub enum Error {
    /// I/O failure, with the path when one is known.
    Io {
        path: Option<PathBuf>,
        source: io::Error,
    },
    /// The XML document itself is malformed (not just one row).
    XmlParse { offset: u64, message: String },
    /// A JSONL record is invalid. `line` is 1-based.
    JsonLine { line: u64, message: String },
    /// The same doc_id appeared twice. Line numbers are present when the
    /// duplicate was detected during JSONL ingestion.
    DuplicateDocId {
        doc_id: u64,
        first_line: Option<u64>,
        second_line: Option<u64>,
    },
    /// Query text failed to parse. `position` is a 0-based byte offset.
    QueryParse { position: usize, message: String },
    /// A NOT appeared where set evaluation has no bounded meaning
    /// (anywhere but alongside a positive operand of an AND).
    UnboundedNot,
    /// Capability configuration problems (duplicate names, bad fields, ...).
    Config { message: String },
    /// A matrix TSV line is malformed or violates an invariant. 1-based.
    MatrixFormat { line: u64, message: String },
    /// An on-disk index directory is missing pieces or has a bad version.
    IndexFormat { message: String },
    /// A numeric argument violated a documented precondition
    /// (probability outside [0,1], t_jc > t_jt, bad alpha/beta, ...).
    Domain { message: String },
    /// A metric's denominator is empty; never silently reported as 0.
    UndefinedMetric {
        metric: &'static str,
        reason: String,
    },
    /// Labeled samples had no prediction/score to evaluate against.
    MissingPredictions {
        capability: String,
        sample_ids: Vec<String>,
    },
    /// A capability was requested that the matrix does not contain.
    CapabilityNotFound { name: String },
    /// Synthetic benchmark spec cannot be satisfied.
    Synth { message: String },
}

impl fmt::Display for Error {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Error::Io { path: Some(p), source } => write!(f, "{}: {}", p.display(), source),
            Error::Io { path: None, source } => write!(f, "i/o error: {source}"),
            Error::XmlParse { offset, message } => {
                write!(f, "malformed xml at byte {offset}: {message}")
            }
            Error::JsonLine { line, message } => write!(f, "line {line}: {message}"),
            Error::DuplicateDocId { doc_id, first_line: Some(a), second_line: Some(b) } => {
                write!(f, "duplicate doc_id {doc_id} on lines {a} and {b}")
            }
            Error::DuplicateDocId { doc_id, .. } => write!(f, "duplicate doc_id {doc_id}"),
            Error::QueryParse { position, message } => {
                write!(f, "query parse error at position {position}: {message}")
            }
            Error::UnboundedNot => {
                write!(f, "NOT without a positive AND operand has no bounded result set")
            }
            Error::Config { message } => write!(f, "capability config: {message}"),
            Error::MatrixFormat { line, message } => write!(f, "matrix line {line}: {message}"),
            Error::IndexFormat { message } => write!(f, "index format: {message}"),
            Error::Domain { message } => write!(f, "{message}"),
            Error::UndefinedMetric { metric, reason } => {
                write!(f, "{metric} is undefined: {reason}")
            }
            Error::MissingPredictions { capability, sample_ids } => write!(
                f,
                "no prediction for {} labeled sample(s) of capability '{}': {}",
                sample_ids.len(),
                capability,
                sample_ids.join(", ")
            ),
            Error::CapabilityNotFound { name } => {
                write!(f, "capability '{name}' not present in matrix")
            }
            Error::Synth { message } => write!(f, "synthetic benchmark: {message}"),
        }
    }
}

impl std::error::Error for Error {
    fn source(&self) -> Option<&(dyn std::error::Error + 'static)> {
        match self {
            Error::Io { source, .. } => Some(source),
            _ => None,
        }
    }
}

impl From<io::Error> for Error {
    fn from(source: io::Error) -> Self {
        Error::Io { path: None, source }
    }
}

impl Error {
    /// Attach a path to a bare I/O error (helper for `File::open` call sites).
    pub fn io(path: impl Into<PathBuf>, source: io::Error) -> Self {
        Error::Io { path: Some(path.into()), source }
    }
}
