use std::path::PathBuf;

use crate::limitlab::SumsCase;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("invalid law: {0}")]
    InvalidLaw(String),

    #[error("phi law violates assumption (A1): P(phi = 1) must be strictly below 1 (got {0})")]
    PhiAtOne(f64),

    #[error("h(t) and b_n are only defined for the discrete Pareto innovation law")]
    NotHeavyTailed,

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("stationary series did not converge within {0} terms")]
    NonConvergence(usize),

    #[error("regeneration cycle exceeded {0} steps")]
    RunawayCycle(u64),

    #[error("total progeny did not die out within {0} generations")]
    RunawayProgeny(u64),

    #[error("sums case {case:?} does not match the model ({detail})")]
    CaseMismatch { case: SumsCase, detail: String },

    #[error("sample has no usable tail: {0}")]
    DegenerateTail(String),

    #[error("config: {0}")]
    Config(String),

    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
