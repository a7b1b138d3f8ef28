use thiserror::Error;

/// Errors raised by the toolkit.
///
/// Every variant maps to a stable machine-readable kind string (see
/// [`Error::kind`]) used by the command-line front end.
#[derive(Debug, Error)]
pub enum Error {
    #[error("expected {expected} entries, got {actual}")]
    Dimension { expected: usize, actual: usize },

    #[error("density mass is {mass}, expected 1")]
    Normalization { mass: f64 },

    #[error("density has zero total mass")]
    EmptyDensity,

    #[error("precondition violated: {0}")]
    Precondition(String),

    #[error("invalid input: {0}")]
    Input(String),

    #[error("target lies outside the moment hull: {0}")]
    InfeasibleTarget(String),

    #[error("observable system is degenerate: {0}")]
    DegenerateSystem(String),

    #[error("solver did not converge: {0}")]
    NotConverged(String),

    #[error("integral diverges: {0}")]
    DivergentIntegral(String),

    #[error("outside domain: {0}")]
    Domain(String),

    #[error("no critical point: {0}")]
    NoCriticalPoint(String),

    #[error("no phase coexistence: {0}")]
    NoCoexistence(String),

    #[error("invalid selector anchor: {0}")]
    Anchor(String),

    #[error("inconsistent inputs: {0}")]
    Consistency(String),

    #[error("grid too small: {0}")]
    Grid(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    /// Short kind tag, e.g. `"domain"` or `"infeasible-target"`.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::Dimension { .. } => "dimension",
            Error::Normalization { .. } => "normalization",
            Error::EmptyDensity => "empty-density",
            Error::Precondition(_) => "precondition",
            Error::Input(_) => "input",
            Error::InfeasibleTarget(_) => "infeasible-target",
            Error::DegenerateSystem(_) => "degenerate-system",
            Error::NotConverged(_) => "not-converged",
            Error::DivergentIntegral(_) => "divergent-integral",
            Error::Domain(_) => "domain",
            Error::NoCriticalPoint(_) => "no-critical-point",
            Error::NoCoexistence(_) => "no-coexistence",
            Error::Anchor(_) => "anchor",
            Error::Consistency(_) => "consistency",
            Error::Grid(_) => "grid",
            Error::Io(_) => "io",
            Error::Json(_) => "json",
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn check_len(expected: usize, actual: usize) -> Result<()> {
    if expected == actual {
        Ok(())
    } else {
        Err(Error::Dimension { expected, actual })
    }
}
