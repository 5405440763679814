use thiserror::Error;

/// Errors raised by the numerical pipeline.
#[derive(Debug, Error)]
pub enum Error {
    #[error("malformed curve: {0}")]
    MalformedCurve(String),

    #[error("truncation radius {requested} exceeds the curve extent {available}")]
    Truncation { requested: f64, available: f64 },

    #[error("graph breakdown: {0}")]
    GraphBreakdown(String),

    #[error("ODE integration failed: step size underflow at s = {at}")]
    Stiffness { at: f64 },

    #[error("root polishing did not converge in [{lo}, {hi}]")]
    RootPolish { lo: f64, hi: f64 },

    #[error("internal assembly error: {0}")]
    Assembly(String),

    #[error("spectral solver: {0}")]
    Spectral(String),

    #[error("inconclusive stability verdict: lambda0 = {lambda0:e} lies inside the degenerate band")]
    Inconclusive { lambda0: f64 },

    #[error("gauge breakdown at t = {t}: c2 proxy {c2} exceeds eta = {eta}")]
    GaugeBreakdown { t: f64, c2: f64, eta: f64 },

    #[error("step size error: {0}")]
    StepSize(String),

    #[error("degenerate reverse Poincare ratio at t = {t}")]
    DegenerateRatio { t: f64 },

    #[error("domain error: {0}")]
    Domain(String),

    #[error("partition violation: {0}")]
    Partition(String),

    #[error("precondition failed: {0}")]
    Precondition(String),

    #[error("transversality error: {0}")]
    Transversality(String),

    #[error("wrong branch: {0}")]
    WrongBranch(String),

    #[error("calibration never reached omega0 = {omega0:e} (max w0 = {max_w0:e})")]
    Calibration { omega0: f64, max_w0: f64 },

    #[error("unresolved forward limit: {0}")]
    UnresolvedLimit(String),

    #[error("configuration error: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
