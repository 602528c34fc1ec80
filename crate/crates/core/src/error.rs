use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

/// Everything that can go wrong in the library.
///
/// Variants are split into two families: input validation problems and
/// numerical failures. The CLI maps them to distinct exit codes via
/// [`Error::is_numerical`].
#[derive(Debug, Error)]
pub enum Error {
    #[error("matrix is not positive definite (pivot {pivot:e} at row {row})")]
    NotPd { row: usize, pivot: f64 },
    #[error("matrix is not symmetric (|a[{i}][{j}] - a[{j}][{i}]| = {gap:e})")]
    NotSymmetric { i: usize, j: usize, gap: f64 },
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
    #[error("{op} did not converge after {iterations} iterations")]
    NoConvergence { op: &'static str, iterations: usize },
    #[error("eliminated block is singular")]
    SingularBlock,
    #[error("conditioning submatrix is singular")]
    SingularSubmatrix,
    #[error("index {index} out of range for dimension {dim}")]
    IndexOutOfRange { index: usize, dim: usize },
    #[error("model is not walk-summable")]
    NotWalkSummable,
    #[error("matrix is not symmetric diagonally dominant")]
    NotSdd,
    #[error("model is not attractive")]
    NotAttractive,
    #[error("model has no edges")]
    NoEdges,
    #[error("bad parameters: {0}")]
    BadParams(String),
    #[error("graph Laplacian with boundary removed is singular")]
    SingularLaplacian,
    #[error("covariance is numerically singular: {0}")]
    SingularCovariance(String),
    #[error("unknown name `{0}`")]
    UnknownName(String),
    #[error("too few samples: need more than {needed}, have {have}")]
    TooFewSamples { needed: usize, have: usize },
    #[error("split `{0}` is empty or missing")]
    EmptySplit(String),
    #[error("column {0} has zero empirical variance")]
    ZeroVarianceColumn(usize),
    #[error("design matrix is rank deficient")]
    RankDeficient,
    #[error("subset enumeration needs {needed} subsets, budget is {budget}")]
    EnumerationBudgetExceeded { needed: u128, budget: u128 },
    #[error("neighborhood estimate for node {0} is missing")]
    MissingNode(usize),
    #[error("estimate has a non-positive diagonal entry at {0}")]
    ZeroDiagonal(usize),
    #[error("threshold not reached with up to {m_max} samples")]
    Unattainable { m_max: usize },
    #[error("problem too large for exhaustive enumeration: {0}")]
    TooLarge(String),
    #[error("learning failed at node {node}: {source}")]
    Node {
        node: usize,
        #[source]
        source: Box<Error>,
    },
    #[error("invalid input: {0}")]
    Invalid(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl Error {
    /// True for failures of the numerics (as opposed to bad input).
    pub fn is_numerical(&self) -> bool {
        match self {
            Error::NotPd { .. }
            | Error::NoConvergence { .. }
            | Error::SingularBlock
            | Error::SingularSubmatrix
            | Error::NotWalkSummable
            | Error::NotSdd
            | Error::NotAttractive
            | Error::SingularLaplacian
            | Error::SingularCovariance(_)
            | Error::RankDeficient
            | Error::ZeroDiagonal(_)
            | Error::Unattainable { .. }
            | Error::ZeroVarianceColumn(_) => true,
            Error::Node { source, .. } => source.is_numerical(),
            _ => false,
        }
    }

    /// The underlying error, with per-node wrapping removed.
    pub fn root(&self) -> &Error {
        match self {
            Error::Node { source, .. } => source.root(),
            other => other,
        }
    }

    pub(crate) fn at_node(self, node: usize) -> Error {
        Error::Node {
            node,
            source: Box::new(self),
        }
    }
}
