use crate::lattice::Momentum;
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid Fermi radius: {0}")]
    InvalidRadius(String),
    #[error("momentum k must be nonzero")]
    ZeroMomentum,
    #[error("delta = {delta} outside admissible range ({lo}, {hi})")]
    DeltaOutOfRange { delta: f64, lo: f64, hi: f64 },
    #[error("negative potential value {value} at {k}")]
    NegativePotential { k: Momentum, value: f64 },
    #[error("potential not reflection symmetric: V({k}) = {a} but V(-k) = {b}")]
    AsymmetricPotential { k: Momentum, a: f64, b: f64 },
    #[error("hole {0} is not inside the Fermi ball")]
    HoleOutsideBall(Momentum),
    #[error("particle {0} is not outside the Fermi ball")]
    ParticleInsideBall(Momentum),
    #[error("invalid patch count M = {0}: must be even and at least 2")]
    InvalidPatchCount(usize),
    #[error("infeasible corridor: {0}")]
    InfeasibleCorridor(String),
    #[error("patch {alpha} is not in the index set of k = {k}")]
    PatchNotInIndexSet { alpha: usize, k: Momentum },
    #[error("k = {0} is not in the half-space support of the potential")]
    NotInGammaNor(Momentum),
    #[error("empty mode system at k = {k}: {reason}")]
    EmptyModeSystem { k: Momentum, reason: String },
    #[error("{which} is not positive definite: smallest eigenvalue {min_eig:e}")]
    NotPositiveDefinite { which: String, min_eig: f64 },
    #[error("diagonalization failed at k = {k}: {source}")]
    AtMomentum {
        k: Momentum,
        #[source]
        source: Box<Error>,
    },
    #[error("negative coupling c = {0}")]
    NegativeCoupling(f64),
    #[error("quadrature did not converge: {0}")]
    Quadrature(String),
    #[error("config field `{field}`: {message}")]
    Config { field: String, message: String },
    #[error("invalid input: {0}")]
    InvalidInput(String),
}

pub type Result<T> = std::result::Result<T, Error>;
