use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("shape mismatch in {op}: {left:?} vs {right:?}")]
    ShapeMismatch { op: &'static str, left: (usize, usize), right: (usize, usize) },

    #[error("variable count mismatch: expected {expected}, got {got}")]
    VarCountMismatch { expected: usize, got: usize },

    #[error("bilinear expression: product of decision variables `{left}` and `{right}`")]
    Bilinear { left: String, right: String },

    #[error("solution is not feasible ({0}); cannot extract decision variables")]
    NotFeasible(String),

    #[error("infinite H\u{221e} norm: system is not stable (margin {margin:.3e})")]
    Unstable { margin: f64 },

    #[error("empty admissible grid: no sample point satisfies the parameter constraints")]
    EmptyGrid,

    #[error("time domain mismatch: {0}")]
    TimeDomain(String),

    #[error("baseline requires affine LFT form: {0}")]
    NotAffineLft(String),

    #[error("no structured Gramians (system not LFT-stable): {0}")]
    NoStructuredGramians(String),

    #[error("singular Gramian block {block} (lambda_min = {lambda_min:.3e})")]
    SingularGramianBlock { block: usize, lambda_min: f64 },

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("reduction infeasible: {0}")]
    Infeasible(String),

    #[error("increase degrees (keep increasing the storage-function degree d_P): {0}")]
    BisectionCap(String),

    #[error("numerical failure: {0}")]
    Numerical(String),

    #[error("parse error: {0}")]
    Parse(String),
}

pub type Result<T> = std::result::Result<T, Error>;
