use thiserror::Error;

/// Errors raised by the numerical core.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("mode index k = {k} is below the series start n + 1 = {}", n + 1)]
    ModeIndex { k: u32, n: u32 },

    #[error("degenerate denominator: lambda_{{n+1}} vanishes at p = {p}")]
    DegenerateDenominator { p: f64 },

    #[error("no sign change of the threshold condition for n = {n} in ({lo}, {hi}]")]
    BracketFailure { n: u32, lo: f64, hi: f64 },

    #[error("threshold solving is only defined for n in {{1, 2}}, got n = {0}")]
    UnsupportedIndex(u32),

    #[error("|zeta| = {radius} exceeds the trust radius {trust}")]
    OutsideTrustRadius { radius: f64, trust: f64 },

    #[error("derivatives are singular at the critical point zeta = 0")]
    SingularPoint,

    #[error("inversion of H did not converge at z = ({re}, {im}); residual {residual:e}")]
    InversionFailed { re: f64, im: f64, residual: f64 },

    #[error("field evaluation failed at ({re}, {im}): {source}")]
    FieldEvaluation {
        re: f64,
        im: f64,
        #[source]
        source: Box<Error>,
    },

    #[error("grid geometry mismatch: {0}")]
    GeometryMismatch(String),

    #[error("invalid grid: {0}")]
    InvalidGrid(String),

    #[error("malformed series document at `{path}`: {reason}")]
    SeriesDocument { path: String, reason: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

impl Error {
    pub(crate) fn invalid(name: &'static str, reason: impl Into<String>) -> Self {
        Error::InvalidParameter {
            name,
            reason: reason.into(),
        }
    }
}
