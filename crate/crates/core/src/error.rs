use thiserror::Error;

/// Every failure the library can surface. Variants carry enough context to
/// locate the offending radius, order or parameter.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("derivative order {requested} unavailable (max {max})")]
    OrderUnavailable { requested: usize, max: usize },

    #[error("domain error: {0}")]
    Domain(String),

    #[error("parse error at byte {pos}: {msg}")]
    Parse { pos: usize, msg: String },

    #[error("the two formulas for H disagree at r = {r}: {first} vs {second}")]
    InconsistentFormulas { r: f64, first: f64, second: f64 },

    #[error("H(r) has no detectable limit at infinity: {0}")]
    NoLimit(String),

    #[error("perturbation mode {mode} does not apply to this base profile: {reason}")]
    ModeMismatch { mode: String, reason: String },

    #[error("dimension error: {0}")]
    Dimension(String),

    #[error("operator has a negative eigenvalue {value}")]
    NegativeEigenvalue { value: f64 },

    #[error("truncation radius too small: Im(kappa) * R_max = {product} < {required}")]
    TruncationTooSmall { product: f64, required: f64 },

    #[error("singular linear system at row {row}")]
    SingularSystem { row: usize },

    #[error("beta integral diverges at the origin (local exponent {exponent})")]
    BetaDiverges { exponent: f64 },

    #[error("hypothesis failed: {0}")]
    HypothesisFail(String),

    #[error("exponent pair is not admissible: {0}")]
    NotAdmissible(String),

    #[error("solution exceeded ceiling at t = {t}, r = {r}")]
    BlowUp { t: f64, r: f64 },

    #[error("time step violates stability limit: dt = {dt}, limit = {limit}")]
    CflViolation { dt: f64, limit: f64 },

    #[error("configuration error: {0}")]
    Config(String),

    #[error("closed form mismatch for {name}: computed {computed}, expected {expected}")]
    MismatchWithClosedForm { name: String, computed: f64, expected: f64 },

    #[error("io error: {0}")]
    Io(String),
}

impl Error {
    /// True for errors caused by user input rather than numerical breakdown.
    pub fn is_config(&self) -> bool {
        matches!(self, Error::Config(_) | Error::Parse { .. })
    }
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

impl From<serde_json::Error> for Error {
    fn from(e: serde_json::Error) -> Self {
        Error::Config(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, Error>;
