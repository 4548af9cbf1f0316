use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("algebra rank mismatch: expected so({expected}), got so({got})")]
    RankMismatch { expected: usize, got: usize },

    #[error("matrix is not antisymmetric: max |B + B^T| entry = {defect:.3e}")]
    NotAntisymmetric { defect: f64 },

    #[error("matrix is not a rotation: {reason}")]
    NotRotation { reason: String },

    #[error("invalid grid: {reason}")]
    InvalidGrid { reason: String },

    #[error("fields live on different grids or algebras")]
    GridMismatch,

    #[error("center (x0, t0) invalid: {reason}")]
    InvalidCenter { reason: String },

    #[error("axis {axis} out of range for dimension {n}")]
    AxisOutOfRange { axis: usize, n: usize },

    #[error(
        "connection is not close enough to a soliton: weighted residual {residual:.3e} \
         exceeds {gate:.3e} (= gate factor {factor:.1e} x weighted curvature norm)"
    )]
    NotNearSoliton { residual: f64, gate: f64, factor: f64 },

    #[error("invalid argument: {reason}")]
    InvalidArgument { reason: String },

    #[error("iteration failed to converge: {what}")]
    NotConverged { what: String },

    #[error("flow step rejected: {reason}")]
    FlowRejected { reason: String },

    #[error("curvature blow-up: sup |F| = {sup_f:.3e} exceeded {limit:.3e} at t = {t:.6}")]
    Blowup { sup_f: f64, limit: f64, t: f64 },

    #[error("Gram system is numerically singular ({what}); run the descent check")]
    SingularGram { what: String },

    #[error("archive is corrupt or mismatched: {reason}")]
    Archive { reason: String },

    #[error("io error: {0}")]
    Io(#[from] std::io::Error),

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
}
