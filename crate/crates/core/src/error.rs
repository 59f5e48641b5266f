use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("unsupported dimension {0}: expected 1, 2 or 3")]
    UnsupportedDimension(usize),

    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("matrix eigenvalues [{min}, {max}] outside the admissible range [{lo}, {hi}]")]
    OutsideEllipticRange { min: f64, max: f64, lo: f64, hi: f64 },

    #[error("decomposition infeasible: reconstruction residual {residual:e} exceeds {tolerance:e}")]
    DecompositionInfeasible { residual: f64, tolerance: f64 },

    #[error("mesh size h = {h} leaves no interior nodes (inradius {inradius})")]
    EmptyInterior { h: f64, inradius: f64 },

    #[error("barrier search failed: {0}")]
    BarrierSearch(String),

    #[error("solver did not converge in {iterations} iterations (residual {residual:e})")]
    NotConverged { iterations: usize, residual: f64, trajectory: Vec<f64> },

    #[error("non-finite value in operator evaluation at node {node}")]
    NonFinite { node: usize },

    #[error("negative sample {value} for nonnegative field `{field}`")]
    NegativeSample { field: &'static str, value: f64 },

    #[error("coefficient {value} outside declared box [{lo}, {hi}]")]
    CoefficientOutOfBox { value: f64, lo: f64, hi: f64 },

    #[error("unknown {kind} `{name}`")]
    Unknown { kind: &'static str, name: String },

    #[error("expression error: {0}")]
    Expression(String),

    #[error("config error: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn invalid(name: &'static str, reason: impl Into<String>) -> Error {
    Error::InvalidParameter { name, reason: reason.into() }
}
