use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("alphabet size must be at least 1")]
    EmptyAlphabet,
    #[error("alphabet labels must be distinct and one per symbol")]
    InvalidLabels,
    #[error("expected {expected} entries, got {actual}")]
    LengthMismatch { expected: usize, actual: usize },
    #[error("entry {index} is not finite")]
    NonFinite { index: usize },
    #[error("weight {value} at index {index} is negative")]
    NegativeWeight { index: usize, value: f64 },
    #[error("weights sum to {sum}, not 1")]
    NotNormalized { sum: f64 },
    #[error("alphabet mismatch: {0}")]
    AlphabetMismatch(String),
    #[error("distribution is not over a product alphabet of the required shape")]
    NotProduct,
    #[error("factor index {index} out of range for {factors} factors")]
    InvalidFactor { index: usize, factors: usize },
    #[error("{name} = {value} is out of range")]
    OutOfRange { name: &'static str, value: f64 },
    #[error("behavior does not have binary inputs and outputs")]
    NotBinary,
    #[error("{count} deterministic strategy pairs exceed the cap of {cap}")]
    DimensionTooLarge { count: u128, cap: u128 },
    #[error("singular value {value:e} lies in the rank ambiguity band around tol = {tol:e}")]
    NumericalRankAmbiguity { value: f64, tol: f64 },
    #[error(
        "map has no numerically fixed probability vector (smallest singular value {smallest:e})"
    )]
    NoFixedPoint { smallest: f64 },
    #[error("solver did not converge after {iterations} iterations (residual {residual:e})")]
    ConvergenceFailure { iterations: usize, residual: f64 },
    #[error("malformed table: {0}")]
    Table(String),
}
