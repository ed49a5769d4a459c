use thiserror::Error;

#[derive(Debug, Error)]
pub enum FilamentError {
    #[error("insufficient resolution for stencil: derivative order {order} needs at least {needed} cells, grid has {n_cells}")]
    InsufficientResolution {
        order: usize,
        needed: usize,
        n_cells: usize,
    },

    #[error("grid mismatch: {left} cells vs {right} cells")]
    GridMismatch { left: usize, right: usize },

    #[error("invalid grid: {0}")]
    InvalidGrid(String),

    #[error("invalid field: {0}")]
    InvalidField(String),

    #[error("unsupported order {order} (maximum {max})")]
    UnsupportedOrder { order: usize, max: usize },

    #[error("validation error: {0}")]
    Validation(String),

    #[error("jet solve did not converge on the {side} boundary at order {order}: residual {residual:e} after {iterations} iterations")]
    JetSolve {
        side: &'static str,
        order: usize,
        residual: f64,
        iterations: usize,
    },

    #[error("eps = {eps} exceeds eps_star = {eps_star}; the datum correction is only defined for small eps")]
    EpsTooLarge { eps: f64, eps_star: f64 },

    #[error("singular diagonal block {block} in banded solve")]
    SingularBlock { block: usize },

    #[error("implicit midpoint iteration did not converge: update {residual:e} after {iterations} iterations")]
    FixedPoint { residual: f64, iterations: usize },

    #[error("transform undefined: curvature below floor {floor:e} at every probed node")]
    TransformUndefined { floor: f64 },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl FilamentError {
    /// True for failures of a numerical procedure (as opposed to bad input).
    pub fn is_numerical(&self) -> bool {
        matches!(
            self,
            FilamentError::JetSolve { .. }
                | FilamentError::SingularBlock { .. }
                | FilamentError::FixedPoint { .. }
                | FilamentError::TransformUndefined { .. }
        )
    }

    /// Residual carried by a numerical failure, if any.
    pub fn residual(&self) -> Option<f64> {
        match self {
            FilamentError::JetSolve { residual, .. } | FilamentError::FixedPoint { residual, .. } => {
                Some(*residual)
            }
            _ => None,
        }
    }
}

pub type Result<T> = std::result::Result<T, FilamentError>;
