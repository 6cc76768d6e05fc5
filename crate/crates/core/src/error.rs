use std::path::PathBuf;

/// Everything that can go wrong while configuring or running an experiment.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("configuration error: {0}")]
    Config(String),

    #[error("simulation diverged at step {step}: {reason}")]
    Diverged { step: usize, reason: String },

    #[error("{function} is undefined here: {detail}")]
    Domain {
        function: &'static str,
        detail: String,
    },

    #[error(
        "root search for output {output} stopped after {iterations} iterations \
         with bracket [{lo}, {hi}] (residuals {residual_lo:e}, {residual_hi:e})"
    )]
    RootNotConverged {
        output: usize,
        iterations: usize,
        lo: f64,
        hi: f64,
        residual_lo: f64,
        residual_hi: f64,
    },

    #[error("I/O error on {}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("malformed file {}: {detail}", path.display())]
    Format { path: PathBuf, detail: String },
}

impl Error {
    pub(crate) fn config(msg: impl Into<String>) -> Self {
        Error::Config(msg.into())
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
