use metrology_core::bounds::BoundError;
use metrology_core::infer::InferError;
use metrology_core::povm::PovmError;
use metrology_core::probe::ProbeError;
use metrology_core::sim::SimError;
use metrology_core::synth::SynthError;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error("configuration error: {0}")]
    Config(String),

    #[error("input does not match the runs CSV schema: {0}")]
    SchemaMismatch(String),

    #[error(transparent)]
    Probe(#[from] ProbeError),

    #[error(transparent)]
    Bound(#[from] BoundError),

    #[error(transparent)]
    Povm(#[from] PovmError),

    #[error(transparent)]
    Synth(#[from] SynthError),

    #[error(transparent)]
    Sim(#[from] SimError),

    #[error(transparent)]
    Infer(#[from] InferError),

    #[error("{0}")]
    Threshold(String),

    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

impl HarnessError {
    /// 2 for bad input, 3 for numerical failures, 4 for failed checks.
    pub fn exit_code(&self) -> i32 {
        match self {
            HarnessError::Config(_) | HarnessError::SchemaMismatch(_) | HarnessError::Probe(_) => 2,
            HarnessError::Sim(SimError::InvalidProbability { .. } | SimError::UnknownProfile(_)) => 2,
            HarnessError::Threshold(_) => 4,
            HarnessError::Io { .. } => 1,
            _ => 3,
        }
    }

    pub fn io(path: impl AsRef<std::path::Path>, source: std::io::Error) -> Self {
        HarnessError::Io {
            path: path.as_ref().display().to_string(),
            source,
        }
    }
}
