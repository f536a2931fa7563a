use thiserror::Error;

use crate::shift::Letter;

/// Errors raised by the computational modules and the command-line front end.
#[derive(Debug, Error)]
pub enum Error {
    #[error("truncation rule kept no letters")]
    EmptyTruncation,

    #[error("pruning letters without predecessors or successors emptied the truncation")]
    Disconnected,

    #[error("word {0:?} is not admissible")]
    InadmissibleWord(Vec<Letter>),

    #[error("letter {0:?} is not present in the truncation")]
    LetterAbsent(Letter),

    #[error("potential is not eventually positive: S_N = {sum} <= B on cyclic word {word:?}")]
    NotEventuallyPositive { word: Vec<Letter>, sum: f64 },

    #[error("transfer discretization needs {needed} cylinders, limit is {limit}")]
    TooManyCylinders { needed: usize, limit: usize },

    #[error("power iteration did not converge in {iterations} iterations (last residual {residual:e})")]
    NoConvergence { iterations: usize, residual: f64 },

    #[error("tail model unavailable: {0}")]
    TailModelUnavailable(String),

    #[error("pressure never changed sign on ({lo}, {hi}]")]
    NoSignChange { lo: f64, hi: f64 },

    #[error("pressure is not monotone: P(-{t1} f) = {p1} < P(-{t2} f) = {p2}")]
    NonMonotonePressure { t1: f64, p1: f64, t2: f64, p2: f64 },

    #[error("node budget of {limit} exhausted; partial lower bound {partial}")]
    BudgetExplosion { limit: u64, partial: f64 },

    #[error("orbit enumeration needs words of length {needed}, budget allows {limit}")]
    CutoffTooSmall { needed: usize, limit: usize },

    #[error("sample point for cylinder {0:?} is periodic")]
    SamplePointPeriodic(Vec<Letter>),

    #[error("potential is not strictly positive on the truncation (certified inf {0})")]
    NotStrictlyPositive(f64),

    #[error("matrix is numerically singular (det = {0})")]
    NumericallySingular(f64),

    #[error("flag is degenerate: {0}")]
    DegenerateFlag(String),

    #[error("flag too close to a non-transverse position (angle {angle:e} < {epsilon:e}); increase depth")]
    FlagDegenerate { angle: f64, epsilon: f64 },

    #[error("ping-pong check failed: {0}")]
    PingPongFailure(String),

    #[error("invalid group presentation: {0}")]
    InvalidPresentation(String),

    #[error("no crossing of the zero-pressure level on ray theta = {theta}")]
    NoCrossing { theta: f64 },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("config error at `{key}`: {message}")]
    Config { key: String, message: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    pub(crate) fn config(key: impl Into<String>, message: impl Into<String>) -> Self {
        Error::Config {
            key: key.into(),
            message: message.into(),
        }
    }

    /// Process exit code for the command-line front end.
    ///
    /// 2: configuration or input error, 3: numerical non-convergence,
    /// 4: enumeration or memory budget exceeded.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::NoConvergence { .. }
            | Error::NoSignChange { .. }
            | Error::NonMonotonePressure { .. }
            | Error::NoCrossing { .. }
            | Error::TailModelUnavailable(_)
            | Error::NumericallySingular(_)
            | Error::DegenerateFlag(_)
            | Error::FlagDegenerate { .. } => 3,
            Error::BudgetExplosion { .. }
            | Error::CutoffTooSmall { .. }
            | Error::TooManyCylinders { .. } => 4,
            _ => 2,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
