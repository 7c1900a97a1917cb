use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("invalid grid: {0}")]
    InvalidGrid(String),

    #[error("medium is not periodic on the grid: {0}")]
    NotPeriodic(String),

    #[error("cell mass matrix is not positive definite")]
    MassNotPositive,

    #[error("requested {requested} bands but the cell has only {available} unknowns")]
    TooManyBands { requested: usize, available: usize },

    #[error("degenerate band {band} at j = ({j1}, {j2}); group velocity undefined")]
    DegenerateBand { band: usize, j1: f64, j2: f64 },

    #[error("incoming vector ({j1}, {j2}) is not admissible: {reason}")]
    InadmissibleIncoming { j1: f64, j2: f64, reason: String },

    #[error("radiation basis for the {0} side is empty")]
    EmptyBasis(&'static str),

    #[error("all Bloch columns on the {0} side are linearly dependent")]
    DegenerateBasis(&'static str),

    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error("source coefficient is not constant on the transition strip")]
    NonConstantCoefficient,

    #[error("linear solve failed: {0}")]
    Solve(String),

    #[error("residual check failed: relative residual {0:e}")]
    Residual(f64),

    #[error("transmitted wave is evanescent (|j_in| / sqrt(a*) < j2)")]
    Evanescent,

    #[error("band curvature not converged: {coarse} at dj, {fine} at dj/2")]
    Richardson { coarse: f64, fine: f64 },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    /// True for failures caused by the input rather than by the numerics.
    pub fn is_config(&self) -> bool {
        matches!(
            self,
            Error::Config(_)
                | Error::InvalidGrid(_)
                | Error::NotPeriodic(_)
                | Error::TooManyBands { .. }
                | Error::InadmissibleIncoming { .. }
                | Error::NonConstantCoefficient
                | Error::Json(_)
        )
    }
}
