use thiserror::Error;

/// Errors raised by the solver, the oracles, and the metric routines.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("invalid instance: {0}")]
    InvalidInstance(String),

    #[error("oracle evaluation produced a non-finite value at coordinate {coordinate}{}", iteration_suffix(.iteration))]
    OracleEvaluation {
        coordinate: usize,
        iteration: Option<u64>,
    },

    #[error("index {index} out of range for {len} constraints")]
    IndexOutOfRange { index: usize, len: usize },

    #[error(
        "coupling condition violated: (rho*gamma)^2 = {lhs:.6e} > J/(120*C_f^2) = {rhs:.6e} \
         (rho = {rho}, gamma = {gamma}, C_f = {c_f}, J = {constraints})"
    )]
    Coupling {
        lhs: f64,
        rhs: f64,
        rho: f64,
        gamma: f64,
        c_f: f64,
        constraints: usize,
    },

    #[error("insufficient data: {usable} usable points, need at least {required}")]
    InsufficientData { usable: usize, required: usize },

    #[error("metric value {value} at k = {k} is not positive; a log-log fit is undefined")]
    NonPositiveMetric { k: u64, value: f64 },

    #[error("no feasible candidate among {drawn} samples; increase the sample budget")]
    NoFeasibleSamples { drawn: usize },

    #[error("instance generation failed after {attempts} attempts: {reason}")]
    Generation { attempts: usize, reason: String },
}

fn iteration_suffix(iteration: &Option<u64>) -> String {
    match iteration {
        Some(k) => format!(" (iteration {k})"),
        None => String::new(),
    }
}

impl Error {
    /// Attaches an iteration index to an oracle failure.
    pub fn at_iteration(self, k: u64) -> Self {
        match self {
            Error::OracleEvaluation { coordinate, .. } => Error::OracleEvaluation {
                coordinate,
                iteration: Some(k),
            },
            other => other,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
