use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("zero subspace: matrix has no nonzero singular value")]
    ZeroSubspace,

    #[error("empty null space: matrix has full column rank {rank}")]
    EmptyNullSpace { rank: usize },

    #[error("ambient dimension mismatch: {left} vs {right}")]
    DimensionMismatch { left: usize, right: usize },

    #[error("shape mismatch: {left:?} vs {right:?}")]
    ShapeMismatch {
        left: (usize, usize),
        right: (usize, usize),
    },

    #[error("matrix contains non-finite entries")]
    NonFinite,

    #[error("matrix is not Hermitian (asymmetry {asymmetry:e})")]
    NotHermitian { asymmetry: f64 },

    #[error("matrix is indefinite (eigenvalue {eigenvalue:e})")]
    Indefinite { eigenvalue: f64 },

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("BD infeasible: rank sum {rank_sum} exceeds {transmit_antennas} transmit antennas")]
    BdInfeasible {
        rank_sum: usize,
        transmit_antennas: usize,
    },

    #[error("no BD-feasible arrangement of {users} users")]
    NoFeasibleArrangement { users: usize },

    #[error("combinatorial blow-up: {users} users exceeds exhaustive limit {limit}")]
    CombinatorialBlowUp { users: usize, limit: usize },

    #[error("config error: {0}")]
    Config(String),

    #[error("unknown preset {name:?}; valid presets: {valid}")]
    UnknownPreset { name: String, valid: String },

    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("experiment {label:?}: {source}")]
    Experiment {
        label: String,
        #[source]
        source: Box<Error>,
    },
}

impl Error {
    /// True for errors caused by a scenario that cannot be scheduled, as
    /// opposed to malformed input.
    pub fn is_infeasible(&self) -> bool {
        match self {
            Error::BdInfeasible { .. }
            | Error::NoFeasibleArrangement { .. }
            | Error::CombinatorialBlowUp { .. } => true,
            Error::Experiment { source, .. } => source.is_infeasible(),
            _ => false,
        }
    }
}
