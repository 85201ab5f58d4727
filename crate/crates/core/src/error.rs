//! Error type shared by the geometry layers.

use thiserror::Error;

use crate::expr::ExprError;

#[derive(Debug, Clone, Error)]
pub enum GeomError {
    #[error("expression evaluation failed: {0}")]
    Expr(#[from] ExprError),

    #[error("coordinate {} = {value} outside chart domain [{lo}, {hi}]", axis + 1)]
    PointOutsideDomain { axis: usize, value: f64, lo: f64, hi: f64 },

    #[error("metric is not positive definite: smallest eigenvalue {min_eigenvalue:e}")]
    MetricNotPositiveDefinite { min_eigenvalue: f64 },

    #[error("dimension mismatch in {what}: {detail}")]
    BadDimension { what: &'static str, detail: String },

    #[error("invalid complex structure: {detail}")]
    ComplexStructureInvalid { detail: String },

    #[error("operation requires a complex structure but the chart has none")]
    MissingComplexStructure,

    #[error("basis is not orthonormal: Gram residual {residual:e}")]
    BasisNotOrthonormal { residual: f64 },

    #[error("degenerate frame construction: {detail}")]
    FrameDegenerate { detail: String },

    #[error("differential rank mismatch: expected {expected}, singular values {singular_values:?}")]
    RankMismatch { expected: usize, singular_values: Vec<f64> },

    #[error("pushforward of the horizontal frame is not an isometry: residual {residual:e}")]
    IsometryViolation { residual: f64 },

    #[error("{what} symmetry violated beyond tolerance: residual {residual:e}")]
    SymmetryViolation { what: &'static str, residual: f64 },

    #[error("finite-difference stencil did not converge: Richardson disagreement {estimate:e}")]
    FdNonConvergence { estimate: f64 },

    #[error("no fiber chart available: {detail}")]
    MissingFiberChart { detail: String },

    #[error("{kind} space-form validation failed: residual {residual:e}")]
    SpaceFormValidation { kind: &'static str, residual: f64 },

    #[error("second fundamental form has a component along the range: residual {residual:e}")]
    RangeContainment { residual: f64 },

    #[error("scenario file error at line {line}: {detail}")]
    ScenarioParse { line: usize, detail: String },

    #[error("configuration error: {detail}")]
    Config { detail: String },
}
