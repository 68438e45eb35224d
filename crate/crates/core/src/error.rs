use std::path::PathBuf;

/// Errors surfaced by the library.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    /// An argument lies outside the domain of an operation.
    #[error("domain error: {0}")]
    Domain(String),

    /// A model or scan configuration is inconsistent.
    #[error("configuration error: {0}")]
    Config(String),

    /// A configuration file contained a key nothing consumes.
    #[error("unknown configuration key `{0}`")]
    UnknownKey(String),

    /// A required configuration section is absent.
    #[error("missing required section `[{0}]`")]
    MissingSection(String),

    /// The RK4 propagation drifted off the unit sphere.
    #[error("integrator failure at dt = {dt} fs: norm drift {drift:.3e} exceeds {tolerance:.1e}")]
    NormDrift { dt: f64, drift: f64, tolerance: f64 },

    /// The time step does not resolve the fastest phase in the problem.
    #[error("integrator error: dt = {dt} fs too coarse, {phase_per_step:.3} rad per step (limit {limit:.3})")]
    GridTooCoarse {
        dt: f64,
        phase_per_step: f64,
        limit: f64,
    },

    #[error("I/O error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("serialization error: {0}")]
    Serialize(String),
}

impl Error {
    pub(crate) fn domain(msg: impl Into<String>) -> Self {
        Error::Domain(msg.into())
    }

    pub(crate) fn config(msg: impl Into<String>) -> Self {
        Error::Config(msg.into())
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    /// Process exit code for the CLI: 2 config, 3 numeric, 4 I/O.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Config(_) | Error::UnknownKey(_) | Error::MissingSection(_) => 2,
            Error::Domain(_) | Error::NormDrift { .. } | Error::GridTooCoarse { .. } => 3,
            Error::Io { .. } | Error::Serialize(_) => 4,
        }
    }

    /// Short machine-greppable code, printed before the human explanation.
    pub fn code(&self) -> &'static str {
        match self {
            Error::Domain(_) => "E_DOMAIN",
            Error::Config(_) => "E_CONFIG",
            Error::UnknownKey(_) => "E_CONFIG_UNKNOWN_KEY",
            Error::MissingSection(_) => "E_CONFIG_MISSING_SECTION",
            Error::NormDrift { .. } => "E_NUMERIC_NORM_DRIFT",
            Error::GridTooCoarse { .. } => "E_NUMERIC_GRID",
            Error::Io { .. } => "E_IO",
            Error::Serialize(_) => "E_IO_SERIALIZE",
        }
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
