use thiserror::Error;

pub type Result<T, E = RaschError> = std::result::Result<T, E>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum RaschError {
    #[error("non-finite argument {0}")]
    NonFinite(f64),
    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },
    #[error("outcome set has {outcomes} values but the design has {edges} edges")]
    OutcomeMismatch { outcomes: usize, edges: usize },
    #[error("outcome value {value} at edge {edge} is not binary")]
    NonBinaryOutcome { edge: usize, value: u8 },
    #[error("probability {0} is outside [0, 1]")]
    InvalidProbability(f64),
    #[error("edge ({individual}, {item}) is out of range for a {r} x {t} design")]
    EdgeOutOfRange {
        individual: usize,
        item: usize,
        r: usize,
        t: usize,
    },
    #[error("duplicate edge ({individual}, {item})")]
    DuplicateEdge { individual: usize, item: usize },
    #[error("design has no edges")]
    EmptyDesign,
    #[error("design must have at least one individual and one item")]
    EmptySide,
    #[error("brute-force oracle is limited to r + t <= {limit}, got {size}")]
    OracleTooLarge { size: usize, limit: usize },
    #[error("brute-force oracle did not converge after {iterations} iterations (gradient {gradient:e})")]
    OracleNotConverged { iterations: usize, gradient: f64 },
    #[error("node {0} is the anchored parameter and has no standard error")]
    AnchoredNode(usize),
    #[error("node index {index} is out of range for {len} nodes")]
    IndexOutOfRange { index: usize, len: usize },
    #[error("non-positive information {value} at node {node}")]
    NonPositiveInformation { node: usize, value: f64 },
    #[error("contrast covariance matrix is singular")]
    SingularCovariance,
    #[error("dense assembly limited to {limit} nodes, got {size}")]
    TooLargeForDense { size: usize, limit: usize },
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
}
