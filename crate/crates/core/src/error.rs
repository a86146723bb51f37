use std::path::PathBuf;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("domain error: {0}")]
    Domain(String),

    #[error("blocklength m={m} is infeasible: {reason}")]
    InfeasibleBlocklength { m: u32, reason: String },

    #[error("link is infeasible for every blocklength (c1 = {c1:e} W)")]
    InfeasibleLink { c1: f64 },

    #[error("network is infeasible: minimal schedule usage {usage:.6} exceeds budget {budget:.6}")]
    NetworkInfeasible { usage: f64, budget: f64 },

    #[error("no feasible point: {0}")]
    Infeasible(String),

    #[error("size limit exceeded: {0}")]
    SizeLimit(String),

    #[error("invalid config value for `{key}`: {msg}")]
    Config { key: String, msg: String },

    #[error("config parse error in {path}: {msg}")]
    ConfigParse { path: String, msg: String },

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{path}: row {row}: {msg}")]
    Parse { path: PathBuf, row: usize, msg: String },

    #[error("format error: {0}")]
    Format(String),

    #[error("shape mismatch: {0}")]
    Shape(String),

    #[error("node-count mismatch: {0}")]
    Mismatch(String),

    #[error("training diverged at epoch {epoch}, step {step}: loss is {loss}")]
    Divergence { epoch: usize, step: usize, loss: f64 },

    #[error("non-finite value: {0}")]
    NonFinite(String),

    #[error("usage: {0}")]
    Usage(String),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io { path: path.into(), source }
    }

    /// Process exit code for this error: 2 for usage problems, 1 otherwise.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Usage(_) => 2,
            _ => 1,
        }
    }
}
