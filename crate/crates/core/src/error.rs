use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("graph has no nodes")]
    EmptyGraph,

    #[error("node id {id} out of range for {n} nodes")]
    NodeOutOfRange { id: usize, n: usize },

    #[error("class {class} has no members (class ids must be contiguous from 0)")]
    MissingClass { class: usize },

    #[error("labels length {got} does not match node count {expected}")]
    LabelLength { got: usize, expected: usize },

    #[error("adjacency entry ({i},{j}) = {value}; only unweighted 0/1 graphs are supported")]
    WeightedEdge { i: usize, j: usize, value: f64 },

    #[error("adjacency matrix is not symmetric at ({i},{j})")]
    Asymmetric { i: usize, j: usize },

    #[error(
        "eigensolver did not converge after {iterations} iterations \
         (n = {n}, remaining off-diagonal = {offdiag:.3e})"
    )]
    EigenNonConvergence {
        n: usize,
        iterations: usize,
        offdiag: f64,
    },

    #[error("dimension mismatch: {context} (expected {expected}, got {got})")]
    DimMismatch {
        context: &'static str,
        expected: usize,
        got: usize,
    },

    #[error("signal is numerically zero; {context} is undefined")]
    DegenerateSignal { context: &'static str },

    #[error("filter response sums to zero; response efficiency is undefined")]
    UndefinedEfficiency,

    #[error("bound is degenerate: {reason}")]
    DegenerateBound { reason: String },

    #[error("operation requires binary labels (K = 2), got K = {k}")]
    NotBinary { k: usize },

    #[error("closed-form transformed homophily requires degree <= 2, got {degree}")]
    DegreeTooHigh { degree: usize },

    #[error("invalid filter spec '{spec}': {reason}")]
    FilterSpec { spec: String, reason: String },

    #[error("parse error in {file} at line {line}: {reason}")]
    Parse {
        file: String,
        line: usize,
        reason: String,
    },

    #[error("io error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("loss became non-finite at epoch {epoch} (loss = {loss})")]
    NonFiniteLoss { epoch: usize, loss: f64 },

    #[error("filter-bank search exhausted its budget without a positive margin")]
    SearchExhausted,

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
