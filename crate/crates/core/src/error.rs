use std::path::PathBuf;

/// Errors raised anywhere in the pipeline.
///
/// The variants are grouped so that a front end can map them onto exit
/// codes: configuration problems, data/schema problems, and everything else.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("config error: {0}")]
    Config(String),

    #[error("schema error: {0}")]
    Schema(String),

    #[error("parse error at row {row}, column '{column}': {message}")]
    Parse {
        row: usize,
        column: String,
        message: String,
    },

    #[error("data error: {0}")]
    Data(String),

    #[error("contract violation: {0}")]
    Contract(String),

    #[error("unsupported bundle format version {found} (supported: {supported})")]
    UnsupportedVersion { found: u32, supported: u32 },

    #[error("malformed JSON in {context} at line {line}, column {column}: {message}")]
    Json {
        context: String,
        line: usize,
        column: usize,
        message: String,
    },

    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),
}

impl Error {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub fn json(context: impl Into<String>, err: &serde_json::Error) -> Self {
        Error::Json {
            context: context.into(),
            line: err.line(),
            column: err.column(),
            message: err.to_string(),
        }
    }

    /// True for problems with the input data or its schema, as opposed to
    /// configuration mistakes or internal faults.
    pub fn is_data_error(&self) -> bool {
        matches!(
            self,
            Error::Schema(_)
                | Error::Parse { .. }
                | Error::Data(_)
                | Error::UnsupportedVersion { .. }
                | Error::Json { .. }
                | Error::Io { .. }
                | Error::Csv(_)
        )
    }
}

pub type Result<T> = std::result::Result<T, Error>;
