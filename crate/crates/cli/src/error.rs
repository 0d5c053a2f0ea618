use driftfv::{EquilibriumError, HypothesisError, MeshError, TransientError};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("config error: {0}")]
    Config(String),
    #[error("mesh error: {0}")]
    Mesh(MeshError),
    #[error("hypothesis violated: {0}")]
    Hypothesis(#[from] HypothesisError),
    #[error("equilibrium: {0}")]
    Equilibrium(#[from] EquilibriumError),
    #[error("transient: {0}")]
    Transient(#[from] TransientError),
    #[error("invariant violated: {0}")]
    Invariant(String),
    #[error("cannot write {path}: {source}")]
    Io { path: String, source: std::io::Error },
}

impl CliError {
    /// Process exit status: 2 config, 3 hypothesis, 4 solver, 5 invariant,
    /// 1 output failure.
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Config(_) | CliError::Mesh(_) => 2,
            CliError::Hypothesis(_) => 3,
            CliError::Equilibrium(EquilibriumError::NotMMatrix { .. }) => 5,
            CliError::Equilibrium(_) => 4,
            CliError::Transient(e) => match e {
                TransientError::Config(_) => 2,
                TransientError::TimeStep { .. } => 3,
                TransientError::Solve { .. } | TransientError::FixedPoint { .. } | TransientError::NonFinite { .. } => {
                    4
                }
                TransientError::NotMMatrix { .. } | TransientError::Bounds { .. } => 5,
            },
            CliError::Invariant(_) => 5,
            CliError::Io { .. } => 1,
        }
    }

    pub fn io(path: &std::path::Path) -> impl FnOnce(std::io::Error) -> CliError + '_ {
        move |source| CliError::Io { path: path.display().to_string(), source }
    }
}
