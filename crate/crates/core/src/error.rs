use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: expected {expected} samples, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("invalid grid: {0}")]
    InvalidGrid(String),

    #[error("reality violation: imaginary residue {residue:.3e} exceeds tolerance relative to norm {norm:.3e}")]
    RealityViolation { residue: f64, norm: f64 },

    #[error("green kernel is undefined for k = 0; use the mean-flow integral")]
    ZeroMode,

    #[error("time step {dt} exceeds the stable limit {stable_dt}")]
    Cfl { dt: f64, stable_dt: f64 },

    #[error("vorticity support left the annulus [{lo}, {hi}] at t = {t}")]
    SupportViolation { t: f64, lo: f64, hi: f64 },

    #[error("non-finite or runaway value detected at t = {t}: {what}")]
    BlowUp { t: f64, what: String },

    #[error("coordinate map is not monotone at r = {r}")]
    NonMonotoneMap { r: f64 },

    #[error("v = {v} lies outside the monotone range [{lo}, {hi}]")]
    OutsideMap { v: f64, lo: f64, hi: f64 },

    #[error("unresolved oscillation: t = {t} exceeds the reliable limit {t_max} for the panel budget")]
    UnresolvedOscillation { t: f64, t_max: f64 },

    #[error("quadrature failed to converge: {0}")]
    Quadrature(String),

    #[error("fit error: {0}")]
    Fit(String),

    #[error("invalid parameters: {0}")]
    InvalidParams(String),

    #[error("snapshot format error: {0}")]
    Snapshot(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
