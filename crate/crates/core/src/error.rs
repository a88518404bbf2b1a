use thiserror::Error;

/// Errors produced by the solver library.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    /// A thermodynamic or conserved state outside the admissible set.
    #[error("invalid state: {0}")]
    InvalidState(String),

    /// The local equilibrium profile left the domain of the equation of state
    /// (non-positive enthalpy at some evaluation point).
    #[error("invalid equilibrium: {0}")]
    InvalidEquilibrium(String),

    /// The nonlinear equilibrium solve did not converge.
    #[error("equilibrium solve failed: {0}")]
    EquilibriumSolve(String),

    /// The equation of state provides no equilibrium inversion.
    #[error("unsupported by equation of state: {0}")]
    Unsupported(String),

    /// A point outside the cell owning a reconstruction polynomial.
    #[error("point {x} outside cell [{lo}, {hi}]")]
    OutsideCell { x: f64, lo: f64, hi: f64 },

    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),

    #[error("invalid grid: {0}")]
    InvalidGrid(String),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    /// A non-finite value appeared during time integration.
    #[error("non-finite value: {0}")]
    NonFinite(String),

    /// An error raised while processing a specific cell.
    #[error("cell {cell}: {source}")]
    AtCell {
        cell: String,
        #[source]
        source: Box<Error>,
    },

    #[error("io: {0}")]
    Io(String),

    #[error("malformed reference file: {0}")]
    MalformedReference(String),
}

impl Error {
    pub(crate) fn at_cell(self, cell: impl std::fmt::Display) -> Error {
        match self {
            e @ Error::AtCell { .. } => e,
            e => Error::AtCell {
                cell: cell.to_string(),
                source: Box::new(e),
            },
        }
    }
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, Error>;
