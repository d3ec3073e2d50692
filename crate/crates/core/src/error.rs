use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("empty input: {0}")]
    Empty(&'static str),
    #[error("negative weight {0}")]
    NegativeWeight(f64),
    #[error("non-finite value in {0}")]
    NonFinite(&'static str),
    #[error("length mismatch: {what} ({left} vs {right})")]
    LengthMismatch {
        what: &'static str,
        left: usize,
        right: usize,
    },
    #[error("dimension mismatch: expected {expected}, got {got}")]
    Dimension { expected: usize, got: usize },
    #[error("invalid interval [{0}, {1}]")]
    Interval(f64, f64),
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("point {point:?} lies outside the domain")]
    OutsideDomain { point: Vec<f64> },
    #[error("input measure is not a martingale (worst conditional drift {0:.3e})")]
    NotMartingale(f64),
    #[error("payoff is unbounded on the domain and no bound was declared")]
    UnboundedPayoff,
    #[error("LP error: {0}")]
    Lp(String),
    #[error("infeasible: radius {epsilon} is below the minimum feasible radius {min_radius:.6e}")]
    InfeasibleRadius { epsilon: f64, min_radius: f64 },
    #[error("infeasible: marginals are not in convex order, no martingale coupling exists")]
    NotConvexOrdered,
    #[error("unbounded LP: check that the payoff is bounded on the grid and that the grid matches the marginals")]
    Unbounded,
    #[error("size guard exceeded: {rows} rows > {limit}")]
    SizeGuard { rows: u128, limit: u128 },
    #[error("solver stopped at the iteration limit")]
    IterationLimit,
    #[error("unknown {kind} `{name}`")]
    Unknown { kind: &'static str, name: String },
    #[error("parse error: {0}")]
    Parse(String),
    #[error("io error: {0}")]
    Io(String),
}

pub type Result<T> = std::result::Result<T, Error>;

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

impl From<csv::Error> for Error {
    fn from(e: csv::Error) -> Self {
        Error::Parse(e.to_string())
    }
}
