use std::path::{Path, PathBuf};

use thiserror::Error;

/// Failures of a harness command, each with a process exit code.
#[derive(Debug, Error)]
pub enum HarnessError {
    #[error("configuration error: {0}")]
    Config(String),

    #[error("{0}")]
    Coupling(rlsa_core::Error),

    #[error("oracle failure: {0}")]
    Oracle(rlsa_core::Error),

    #[error("invariant check failed: {}", .0.join(", "))]
    Validation(Vec<String>),

    #[error("i/o error on {}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

pub type HarnessResult<T> = std::result::Result<T, HarnessError>;

impl HarnessError {
    pub fn io(path: &Path, source: std::io::Error) -> Self {
        HarnessError::Io {
            path: path.to_path_buf(),
            source,
        }
    }

    pub fn exit_code(&self) -> i32 {
        match self {
            HarnessError::Config(_) | HarnessError::Io { .. } => 1,
            HarnessError::Coupling(_) => 2,
            HarnessError::Oracle(_) => 3,
            HarnessError::Validation(_) => 4,
        }
    }
}

impl From<rlsa_core::Error> for HarnessError {
    fn from(e: rlsa_core::Error) -> Self {
        use rlsa_core::Error as E;
        match e {
            E::Coupling { .. } => HarnessError::Coupling(e),
            E::OracleEvaluation { .. } | E::NoFeasibleSamples { .. } => HarnessError::Oracle(e),
            other => HarnessError::Config(other.to_string()),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exit_codes() {
        assert_eq!(HarnessError::Config("x".into()).exit_code(), 1);
        let c = rlsa_core::Error::Coupling {
            lhs: 1.0,
            rhs: 0.1,
            rho: 1.0,
            gamma: 1.0,
            c_f: 1.0,
            constraints: 12,
        };
        let e = HarnessError::from(c);
        assert_eq!(e.exit_code(), 2);
        assert!(e.to_string().contains("(rho*gamma)^2"));
        let o = rlsa_core::Error::OracleEvaluation {
            coordinate: 0,
            iteration: Some(3),
        };
        assert_eq!(HarnessError::from(o).exit_code(), 3);
        assert_eq!(HarnessError::Validation(vec!["monotonicity".into()]).exit_code(), 4);
    }
}
