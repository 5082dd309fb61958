//! The refinement matrix `Λ_k`: curvature pairs, compact L-BFGS, block BFGS.

mod block;
mod compact;
mod pairs;

pub use block::{block_bfgs_update, sketchy_block_bfgs_update, BlockOutcome, BlockRefinement, PChoice, SketchConfig, SketchKind};
pub use compact::{build_compact, build_compact_with_fallback, CompactLBFGS, GammaRule, GAMMA_MAX, GAMMA_MIN};
pub use pairs::{accept_pair, make_pair, make_structured_pair, AcceptOutcome, CurvaturePair, PairBuffer};

use thiserror::Error;

use crate::models::ModelError;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum RefinementError {
    #[error("parameter step is zero")]
    ZeroStep,
    #[error("pair is not finite")]
    NonFinite,
    #[error("middle matrix P is numerically singular")]
    SingularP,
    #[error("UᵀΛU is singular")]
    RankDeficientU,
    #[error("P is not positive definite")]
    NotPositiveDefinite,
    #[error("initial scale must be positive, got {0}")]
    InvalidGamma(f64),
    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),
    #[error("sketch dimension {dim} outside 1..={cols}")]
    InvalidSketch { dim: usize, cols: usize },
    #[error("model cannot form structured pairs: {0}")]
    UnsupportedModel(ModelError),
    #[error(transparent)]
    Model(ModelError),
}

impl From<ModelError> for RefinementError {
    fn from(e: ModelError) -> Self {
        match e {
            ModelError::Unsupported(_) => RefinementError::UnsupportedModel(e),
            other => RefinementError::Model(other),
        }
    }
}
