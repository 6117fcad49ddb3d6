use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid interval [{lo}, {hi}]")]
    InvalidInterval { lo: f64, hi: f64 },

    #[error("invalid parameters for {kind} density: {reason}")]
    InvalidDensity { kind: String, reason: String },

    #[error("integration did not converge (estimate {estimate}, error {error})")]
    Integration { estimate: f64, error: f64 },

    #[error("total weight is zero or negative")]
    ZeroWeight,

    #[error("singular model: {0}")]
    SingularModel(String),

    #[error("ill-conditioned basis (condition number {cond:.3e}); try fewer polynomial terms")]
    IllConditioned { cond: f64 },

    #[error("non-finite objective at {point:?}")]
    NonFinite { point: Vec<f64> },

    #[error("invalid input: {0}")]
    Input(String),

    #[error("not converged: {0}")]
    NotConverged(String),

    #[error("parameters are not a root of the quasi-score (max relative residual {max_rel:.3e})")]
    NotARoot { max_rel: f64 },

    #[error("weight denominator vanishes at m = {m}")]
    ZeroDenominator { m: f64 },

    #[error("efficiency {eps:.3e} too small at (m={m}, t={t})")]
    TinyEfficiency { m: f64, t: f64, eps: f64 },

    #[error("sampling envelope {envelope} exceeded by density value {value}")]
    Envelope { value: f64, envelope: f64 },

    #[error("undefined Kendall tau: all values tied")]
    AllTied,

    #[error("line {line}: {msg}")]
    Parse { line: usize, msg: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn input(msg: impl Into<String>) -> Self {
        Error::Input(msg.into())
    }
}
