use thiserror::Error;

use crate::subspace::SubspaceEstimate;

pub type Result<T, E = QstError> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum QstError {
    #[error("invalid rank {rank} for dimension {dim}")]
    InvalidRank { rank: usize, dim: usize },

    #[error("shape mismatch: {0}")]
    Shape(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("invalid pattern parameters: {0}")]
    InvalidPatternParameters(String),

    #[error("block of size {size} cannot carry rank {rank}")]
    InsufficientBlockSize { size: usize, rank: usize },

    #[error("basis columns are not orthonormal (Gram deviation {deviation:e})")]
    InvalidBasis { deviation: f64 },

    #[error("error bound inapplicable: {0}")]
    BoundInapplicable(String),

    #[error(
        "eigensolver did not converge after {iterations} iterations \
         (max residual {max_residual:e})"
    )]
    NotConverged {
        iterations: usize,
        max_residual: f64,
        residuals: Vec<f64>,
        best: Box<SubspaceEstimate>,
    },

    /// Column index is 1-based.
    #[error("column {column} has {observed} observed entries, need at least {rank}")]
    UnderdeterminedColumn {
        column: usize,
        observed: usize,
        rank: usize,
    },

    /// Column index is 1-based.
    #[error("restricted basis for column {column} is ill-conditioned (cond {condition:e})")]
    IllConditionedColumn { column: usize, condition: f64 },

    #[error("eigenvalue system is rank deficient ({rank} < {required})")]
    DegenerateEigenvalueSystem { rank: usize, required: usize },

    #[error("objective became non-finite at iteration {iteration}; use a backtracking step rule")]
    StepSize { iteration: usize },

    #[error("{stage}: {source}")]
    Stage {
        stage: &'static str,
        #[source]
        source: Box<QstError>,
    },

    #[error("invalid config: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl QstError {
    pub(crate) fn at(self, stage: &'static str) -> Self {
        QstError::Stage {
            stage,
            source: Box::new(self),
        }
    }

    /// Strips any stage wrappers.
    pub fn root(&self) -> &QstError {
        match self {
            QstError::Stage { source, .. } => source.root(),
            other => other,
        }
    }
}

pub(crate) trait StageExt<T> {
    fn stage(self, stage: &'static str) -> Result<T>;
}

impl<T> StageExt<T> for Result<T> {
    fn stage(self, stage: &'static str) -> Result<T> {
        self.map_err(|e| e.at(stage))
    }
}
