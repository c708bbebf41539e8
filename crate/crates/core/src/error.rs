use std::path::PathBuf;

/// Errors raised anywhere in the toolkit.
///
/// Every message is prefixed with the module that raised it so failures deep
/// inside an experiment run can be traced without a backtrace.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("{module}: alignment error: {msg}")]
    Alignment { module: &'static str, msg: String },

    #[error("{module}: validation error: {msg}")]
    Validation { module: &'static str, msg: String },

    #[error("{module}: domain error: {msg}")]
    Domain { module: &'static str, msg: String },

    #[error("{module}: capacity error: {msg}")]
    Capacity { module: &'static str, msg: String },

    #[error("{module}: boundary error: {msg}")]
    Boundary { module: &'static str, msg: String },

    #[error("{module}: precondition error: {msg}")]
    Precondition { module: &'static str, msg: String },

    #[error("{module}: schema error: {msg}")]
    Schema { module: &'static str, msg: String },

    #[error("{module}: training error: {msg}")]
    Training { module: &'static str, msg: String },

    #[error("{module}: lookup error: {msg}")]
    Lookup { module: &'static str, msg: String },

    #[error("edf: truncated stream at byte {offset}: expected {expected} bytes, found {actual}")]
    Truncated {
        offset: usize,
        expected: usize,
        actual: usize,
    },

    #[error("edf: format error at byte {offset}: {msg}")]
    Format { offset: usize, msg: String },

    #[error("config: {0}")]
    Config(String),

    #[error("io: {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("csv: {0}")]
    Csv(#[from] csv::Error),

    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}

macro_rules! err {
    ($kind:ident, $module:expr, $($arg:tt)*) => {
        $crate::error::Error::$kind { module: $module, msg: format!($($arg)*) }
    };
}
pub(crate) use err;
