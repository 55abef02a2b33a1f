use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("mode (0, 0) is excluded: fields are mean-zero")]
    ZeroMode,

    #[error("mode ({s1}, {s2}) lies outside cutoff {cutoff}")]
    OutsideBand { s1: i32, s2: i32, cutoff: usize },

    #[error("non-finite value in {0}")]
    NonFinite(&'static str),

    #[error("grid resolution {m} is too small: need at least {need} ({why})")]
    Resolution { m: usize, need: usize, why: &'static str },

    #[error("cutoff mismatch: {left} vs {right}")]
    CutoffMismatch { left: usize, right: usize },

    #[error("eps = {0} is not of the form 1/n for a positive integer n")]
    InvalidEpsilon(f64),

    #[error("solution diverged at t = {t}: |u|_1 = {norm:e} exceeds ceiling {ceiling:e}")]
    Divergence { t: f64, norm: f64, ceiling: f64 },

    #[error("ensemble member {member} failed: {source}")]
    Member {
        member: usize,
        #[source]
        source: Box<Error>,
    },

    #[error("empty sample")]
    EmptySample,

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Toml(#[from] toml::de::Error),
}

impl Error {
    /// True when the error comes from the numerics rather than from bad input.
    pub fn is_divergence(&self) -> bool {
        match self {
            Error::Divergence { .. } | Error::NonFinite(_) => true,
            Error::Member { source, .. } => source.is_divergence(),
            _ => false,
        }
    }
}
