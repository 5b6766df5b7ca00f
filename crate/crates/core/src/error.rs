use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("input contains a non-finite value (point {point})")]
    NonFiniteInput { point: usize },

    #[error("point {point} has kernel self-similarity {value} > 1 with normalization enabled")]
    NormalizationViolated { point: usize, value: f64 },

    #[error("invalid kernel parameters: {0}")]
    InvalidKernel(String),

    #[error("index {index} out of range for {len} points")]
    IndexOutOfRange { index: usize, len: usize },

    #[error("eigendecomposition did not converge")]
    SpectralFailure,

    #[error("eigendecay parameters require alpha > 1 and c > 0 (got alpha={alpha}, c={c})")]
    InvalidDecayParams { alpha: f64, c: f64 },

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("empty input")]
    EmptyInput,

    #[error("matrix is not symmetric at ({row}, {col})")]
    NotSymmetric { row: usize, col: usize },

    #[error("label {label} at point {point} is not below k={k}")]
    LabelOutOfRange { point: usize, label: usize, k: usize },

    #[error("cluster {cluster} is empty")]
    EmptyCluster { cluster: usize },

    #[error("k={k} is invalid for {n} points")]
    InvalidK { k: usize, n: usize },

    #[error("instance too large for exhaustive search: n={n}, k={k} (limits n<=12, k<=4)")]
    InstanceTooLarge { n: usize, k: usize },

    #[error("k={k} exceeds the number of points n={n}")]
    KTooLarge { k: usize, n: usize },

    #[error("m={m} must lie in [1, n={n}]")]
    MTooLarge { m: usize, n: usize },

    #[error("delta={0} must lie in (0, 1)")]
    InvalidDelta(f64),

    #[error("effective dimension required for this landmark mode")]
    MissingXi,

    #[error("landmark block has no eigenvalue above the cutoff")]
    SingularLandmarkBlock,

    #[error("feature vector {point} has norm {norm} > 1")]
    NormViolation { point: usize, norm: f64 },

    #[error("n={n} is not divisible by k={k}")]
    NotDivisible { n: usize, k: usize },

    #[error("exhaustive enumeration too large: {0}")]
    EnumerationTooLarge(String),

    #[error("logarithm argument n/rad must exceed 1 with rad > 0 (n={n}, rad={rad})")]
    InvalidLogArgument { n: f64, rad: f64 },

    #[error("center coefficients have length {got}, expected {expected}")]
    CoefficientDimensionMismatch { expected: usize, got: usize },

    #[error("invalid distribution: {0}")]
    InvalidDistribution(String),

    #[error("scaling fit needs at least 3 positive cells, found {0}")]
    NonPositiveRisk(usize),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),
}
