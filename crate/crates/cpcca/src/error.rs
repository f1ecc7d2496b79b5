use thiserror::Error;

/// Crate-wide error type. Every variant carries enough context to be
/// actionable, and [`Error::code`] maps each class to a stable string code
/// for machine-readable consumers (the CLI error JSON).
#[derive(Debug, Error)]
pub enum Error {
    #[error("matrix is not square: {0} x {1}")]
    NotSquare(usize, usize),

    #[error("negative entry {value:e} at ({row}, {col})")]
    NegativeEntry { row: usize, col: usize, value: f64 },

    #[error("row {row} sums to {sum} (deviation {deviation:e} exceeds tolerance {tolerance:e})")]
    RowSumViolation {
        row: usize,
        sum: f64,
        deviation: f64,
        tolerance: f64,
    },

    #[error("row {0} sums to zero and cannot be normalized")]
    ZeroRow(usize),

    #[error("invalid generator spec: {0}")]
    InvalidSpec(String),

    #[error("unknown fixture `{0}` (available: example1, example2:<x>:<y>)")]
    UnknownFixture(String),

    #[error("parse error at line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("eigendecomposition is defective or ill-conditioned: {0}")]
    DefectiveOrIllConditioned(String),

    #[error(
        "selecting {count} eigenvalues would split the conjugate pair at index {pair_index}; \
         use {} or {} clusters instead", count - 1, count + 1
    )]
    SplitConjugatePair { count: usize, pair_index: usize },

    #[error("eigenvalue count {count} must be at least 1 and below the matrix dimension {dim}")]
    InvalidEigenCount { count: usize, dim: usize },

    #[error("column {column} has non-negligible imaginary part {magnitude:e}")]
    NonNegligibleImaginaryPart { column: usize, magnitude: f64 },

    #[error("column {0} has a complex eigenvalue but no adjacent conjugate partner")]
    UnpairedComplexColumn(usize),

    #[error("basis is rank deficient at column {0}")]
    RankDeficient(usize),

    #[error("the constant vector is not in the span of the input columns (residual {0:e})")]
    ConstantVectorNotInSpan(f64),

    #[error("stationary density is not strictly positive (min entry {0:e})")]
    NonPositiveStationaryDensity(f64),

    #[error("weight vector invalid: {0}")]
    InvalidWeight(String),

    #[error("simplex vertex matrix is degenerate (condition estimate {0:e})")]
    DegenerateSimplex(f64),

    #[error("feasibilization scale factor {0} is not positive; candidate transform is degenerate")]
    InfeasibleScaling(f64),

    #[error("cluster {0} has numerically zero total weight")]
    SingularDc(usize),

    #[error("membership projection matrix is singular: {0}")]
    SingularProjection(String),

    #[error("invalid cluster count {0}: {1}")]
    InvalidClusterCount(usize, &'static str),

    #[error("membership entries fall below the feasibility guard: min entry {0:e} < -1e-12")]
    MembershipExcursion(f64),

    #[error("candidate range [{lo}, {hi}] is empty or outside the valid range [2, {max}]")]
    EmptyRange { lo: usize, hi: usize, max: usize },

    #[error("all candidate cluster counts were skipped (conjugate pairs split at every candidate)")]
    AllCandidatesSkipped,

    #[error("quadratic fit needs at least 3 distinct x values, got {0}")]
    InsufficientPoints(usize),

    #[error("quadratic fit design matrix is degenerate: {0}")]
    DegenerateDesign(String),

    #[error("permutation alignment supports at most 5 clusters, got {0}")]
    PermutationSearchTooLarge(usize),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    /// Stable machine-readable code for this error class. These strings are
    /// part of the CLI contract and must not change between releases.
    pub fn code(&self) -> &'static str {
        match self {
            Error::NotSquare(..) => "NOT_SQUARE",
            Error::NegativeEntry { .. } => "NEGATIVE_ENTRY",
            Error::RowSumViolation { .. } => "ROW_SUM_VIOLATION",
            Error::ZeroRow(..) => "ZERO_ROW",
            Error::InvalidSpec(..) => "INVALID_SPEC",
            Error::UnknownFixture(..) => "UNKNOWN_FIXTURE",
            Error::Parse { .. } => "PARSE_ERROR",
            Error::DimensionMismatch(..) => "DIMENSION_MISMATCH",
            Error::DefectiveOrIllConditioned(..) => "DEFECTIVE_OR_ILL_CONDITIONED",
            Error::SplitConjugatePair { .. } => "SPLIT_CONJUGATE_PAIR",
            Error::InvalidEigenCount { .. } => "INVALID_EIGEN_COUNT",
            Error::NonNegligibleImaginaryPart { .. } => "NON_NEGLIGIBLE_IMAGINARY_PART",
            Error::UnpairedComplexColumn(..) => "UNPAIRED_COMPLEX_COLUMN",
            Error::RankDeficient(..) => "RANK_DEFICIENT",
            Error::ConstantVectorNotInSpan(..) => "CONSTANT_VECTOR_NOT_IN_SPAN",
            Error::NonPositiveStationaryDensity(..) => "NON_POSITIVE_STATIONARY_DENSITY",
            Error::InvalidWeight(..) => "INVALID_WEIGHT",
            Error::DegenerateSimplex(..) => "DEGENERATE_SIMPLEX",
            Error::InfeasibleScaling(..) => "INFEASIBLE_SCALING",
            Error::SingularDc(..) => "SINGULAR_DC",
            Error::SingularProjection(..) => "SINGULAR_PROJECTION",
            Error::InvalidClusterCount(..) => "INVALID_CLUSTER_COUNT",
            Error::MembershipExcursion(..) => "MEMBERSHIP_EXCURSION",
            Error::EmptyRange { .. } => "EMPTY_RANGE",
            Error::AllCandidatesSkipped => "ALL_CANDIDATES_SKIPPED",
            Error::InsufficientPoints(..) => "INSUFFICIENT_POINTS",
            Error::DegenerateDesign(..) => "DEGENERATE_DESIGN",
            Error::PermutationSearchTooLarge(..) => "PERMUTATION_SEARCH_TOO_LARGE",
            Error::Io(e) if e.kind() == std::io::ErrorKind::NotFound => "FILE_NOT_FOUND",
            Error::Io(..) => "IO_ERROR",
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
