use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("profile slope {slope} exceeds the Lipschitz bound {bound}")]
    SlopeViolation { slope: f64, bound: f64 },
    #[error("regularity undefined: {0}")]
    UndefinedRegularity(String),
    #[error(
        "generation {requested} is below resolution; finest admissible generation is {finest}"
    )]
    Resolution { requested: i32, finest: i32 },
    #[error("kernel singularity at the origin")]
    Singularity,
    #[error("degenerate cube: achieved spanning ratio {ratio:e}")]
    Degenerate { ratio: f64 },
    #[error("undefined coefficient: {0}")]
    UndefinedCoefficient(String),
    #[error(
        "transport solver did not converge after {pivots} pivots (primal {primal}, dual {dual})"
    )]
    NonConvergence {
        pivots: usize,
        primal: f64,
        dual: f64,
    },
    #[error("unsupported: {0}")]
    Unsupported(String),
    #[error("precondition violated: {0}")]
    Precondition(String),
    #[error("construction failed: {0}")]
    Construction(String),
    #[error("out of range: {0}")]
    Range(String),
    #[error("configuration error: {0}")]
    Config(String),
    #[error("nothing to aggregate")]
    NothingToAggregate,
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),
    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub fn kind(&self) -> &'static str {
        match self {
            Error::InvalidArgument(_) => "invalid_argument",
            Error::SlopeViolation { .. } => "slope_violation",
            Error::UndefinedRegularity(_) => "undefined_regularity",
            Error::Resolution { .. } => "resolution",
            Error::Singularity => "singularity",
            Error::Degenerate { .. } => "degenerate",
            Error::UndefinedCoefficient(_) => "undefined_coefficient",
            Error::NonConvergence { .. } => "non_convergence",
            Error::Unsupported(_) => "unsupported",
            Error::Precondition(_) => "precondition",
            Error::Construction(_) => "construction",
            Error::Range(_) => "range",
            Error::Config(_) => "config",
            Error::NothingToAggregate => "nothing_to_aggregate",
            Error::Io(_) => "io",
            Error::Csv(_) => "csv",
            Error::Json(_) => "json",
        }
    }

    pub fn is_config(&self) -> bool {
        matches!(self, Error::Config(_))
    }
}
