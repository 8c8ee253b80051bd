use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("config error: {0}")]
    Config(String),

    #[error("io error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },

    #[error("parse error in {path} at line {line}: {msg}")]
    Parse {
        path: String,
        line: usize,
        msg: String,
    },

    #[error("matrix is not positive definite: {0}")]
    NotPositiveDefinite(String),

    #[error("singular matrix: {0}")]
    Singular(String),

    #[error("PJOR did not converge after {iterations} iterations (residual {residual:e})")]
    NoConvergence { iterations: usize, residual: f64 },

    #[error("PJOR diverged after {iterations} iterations (residual {residual:e}); Delassus matrix is likely not positive definite")]
    Divergence { iterations: usize, residual: f64 },

    #[error("active-set retry bound ({0}) exceeded; use smaller load increments")]
    RetryBound(usize),

    #[error("contact solve failed at load scale {alpha:e}: {source}")]
    AtLoadScale {
        alpha: f64,
        #[source]
        source: Box<Error>,
    },

    #[error("geometric restriction: {0}")]
    Restriction(String),

    #[error("verification failed: {0}")]
    Verification(String),
}

impl Error {
    /// Stable machine-readable category used for CLI exit codes and reports.
    pub fn category(&self) -> &'static str {
        match self {
            Error::InvalidInput(_) => "invalid-input",
            Error::Config(_) => "config",
            Error::Io { .. } => "io",
            Error::Parse { .. } => "parse",
            Error::NotPositiveDefinite(_) | Error::Singular(_) => "linear-algebra",
            Error::NoConvergence { .. } | Error::Divergence { .. } | Error::RetryBound(_) => {
                "solver"
            }
            Error::AtLoadScale { source, .. } => source.category(),
            Error::Restriction(_) => "restriction",
            Error::Verification(_) => "verification",
        }
    }

    /// Process exit code for the CLI; 1 and 2 are left to generic and usage errors.
    pub fn exit_code(&self) -> i32 {
        match self.category() {
            "config" => 3,
            "parse" => 4,
            "io" => 5,
            "invalid-input" => 6,
            "linear-algebra" => 7,
            "solver" => 8,
            "restriction" => 9,
            "verification" => 10,
            _ => 1,
        }
    }

    pub fn io(path: impl Into<String>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
