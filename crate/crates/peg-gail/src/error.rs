use std::path::PathBuf;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error(transparent)]
    Core(#[from] peg_gail_core::Error),
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("expert dataset not found: {0}")]
    DatasetNotFound(PathBuf),
    #[error("not a {expected} file")]
    WrongKind { expected: &'static str },
    #[error("format version mismatch: file has {found}, expected {expected}")]
    VersionMismatch { found: u32, expected: u32 },
    #[error("checksum mismatch")]
    Checksum,
    #[error("file truncated")]
    Truncated,
    #[error("malformed file: {0}")]
    Malformed(String),
    #[error("parameter layout does not match the network (hash {found:016x}, expected {expected:016x})")]
    SpecMismatch { found: u64, expected: u64 },
    #[error("config: {0}")]
    Config(#[from] toml::de::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error("teleop: {0}")]
    Teleop(String),
}

impl Error {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    /// Short machine-readable name.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::Core(_) => "core",
            Error::Io { .. } => "io",
            Error::DatasetNotFound(_) => "dataset_not_found",
            Error::WrongKind { .. } => "wrong_kind",
            Error::VersionMismatch { .. } => "version_mismatch",
            Error::Checksum => "checksum",
            Error::Truncated => "truncated",
            Error::Malformed(_) => "malformed",
            Error::SpecMismatch { .. } => "spec_mismatch",
            Error::Config(_) => "config",
            Error::Json(_) => "json",
            Error::Csv(_) => "csv",
            Error::Teleop(_) => "teleop",
        }
    }

    /// Process exit code for the command line.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::DatasetNotFound(_) => 2,
            _ => 1,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
