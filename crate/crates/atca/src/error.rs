use std::path::{Path, PathBuf};

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error(transparent)]
    Core(#[from] atca_core::Error),
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("{0}: not a RIFF/WAVE file")]
    NotWav(PathBuf),
    #[error("{path}: unsupported WAV format ({why})")]
    UnsupportedFormat { path: PathBuf, why: String },
    #[error("{0}: file is truncated")]
    TruncatedFile(PathBuf),
    #[error("{path}: bad header ({why})")]
    BadHeader { path: PathBuf, why: String },
    #[error("{path}:{line}: {why}")]
    BadJson {
        path: PathBuf,
        line: usize,
        why: String,
    },
    #[error("{path}:{line}: {why}")]
    BadTsv {
        path: PathBuf,
        line: usize,
        why: String,
    },
    #[error("{path}:{line}: unknown caption style {style:?}")]
    UnknownStyle {
        path: PathBuf,
        line: usize,
        style: String,
    },
    #[error("{0} already exists (pass --force to overwrite)")]
    OutputExists(PathBuf),
    #[error("{0}")]
    Usage(String),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub fn io(path: impl AsRef<Path>) -> impl FnOnce(std::io::Error) -> Error {
        let path = path.as_ref().to_path_buf();
        move |source| Error::Io { path, source }
    }

    pub fn code(&self) -> &'static str {
        match self {
            Error::Core(e) => e.code(),
            Error::Io { .. } => "IO",
            Error::NotWav(_) => "NOT_WAV",
            Error::UnsupportedFormat { .. } => "UNSUPPORTED_FORMAT",
            Error::TruncatedFile(_) => "TRUNCATED_FILE",
            Error::BadHeader { .. } => "BAD_HEADER",
            Error::BadJson { .. } => "BAD_JSON",
            Error::BadTsv { .. } => "BAD_TSV",
            Error::UnknownStyle { .. } => "UNKNOWN_STYLE",
            Error::OutputExists(_) => "OUTPUT_EXISTS",
            Error::Usage(_) => "USAGE",
        }
    }

    /// 1 usage, 2 data, 3 internal invariant violation.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Usage(_) | Error::OutputExists(_) => 1,
            Error::Core(e) if e.is_internal() => 3,
            _ => 2,
        }
    }
}
