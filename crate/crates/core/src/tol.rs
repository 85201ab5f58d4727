//! Centralized numeric thresholds.
//!
//! Every tolerance that gates a hard error or a verdict lives here with its
//! justification, so the numbers are auditable in one place instead of being
//! scattered as magic literals.

/// Smallest metric eigenvalue accepted as positive definite. Chart metrics
/// in well-conditioned regions sit far above this; values below it indicate
/// a degenerate chart point rather than roundoff.
pub const METRIC_MIN_EIGENVALUE: f64 = 1e-10;

/// Gram–Schmidt pivot rejection threshold: candidate residual norms below
/// this are treated as linearly dependent and skipped.
pub const FRAME_PIVOT_MIN_NORM: f64 = 1e-10;

/// Maximum allowed deviation of a Gram matrix from the identity for a basis
/// to count as orthonormal. Frames are produced by explicit normalization,
/// so anything beyond a few ulps signals a real defect.
pub const ORTHONORMALITY: f64 = 1e-10;

/// Pushforward of the horizontal frame must be orthonormal in the target
/// metric to this tolerance for the map to qualify as a Riemannian
/// submersion / Riemannian map.
pub const ISOMETRY: f64 = 1e-8;

/// Raw (i,j)-symmetry of the computed fiber second fundamental form and
/// antisymmetry of the horizontal integrability tensor, checked before the
/// components are symmetrized/antisymmetrized.
pub const TENSOR_SYMMETRY: f64 = 1e-8;

/// Curvature tensor symmetries (pair antisymmetry, pair swap, first Bianchi)
/// relative to the largest component.
pub const CURVATURE_SYMMETRY_REL: f64 = 1e-8;

/// Base step for the central finite-difference stencils, scaled by
/// (1 + |coordinate|). Chosen so truncation (~h^2) and roundoff (~eps/h)
/// are both near 1e-10/1e-11 before Richardson extrapolation.
pub const FD_BASE_STEP: f64 = 1e-5;

/// Richardson extrapolation disagreement above which the finite-difference
/// derivative is declared non-convergent.
pub const FD_MAX_DISAGREEMENT: f64 = 1e-4;

/// Singular values at or above this are counted toward the rank of a
/// differential; the remaining ones must fall below [`RANK_NULL_MAX`].
pub const RANK_SINGULAR_MIN: f64 = 1e-6;

/// Largest singular value still accepted as "numerically zero" when
/// splitting off the kernel of a differential.
pub const RANK_NULL_MAX: f64 = 1e-8;

/// The second fundamental form of a Riemannian map must lie in the normal
/// space of the range; a component along the range larger than this is a
/// hard error, smaller ones are reported and discarded.
pub const RANGE_CONTAINMENT_MAX: f64 = 1e-6;

/// Compatibility of a complex structure with the metric, g(JX, JY) = g(X, Y),
/// at sampled points.
pub const COMPLEX_COMPAT: f64 = 1e-10;

/// Maximum residual for a chart to pass as a real/complex space form.
pub const SPACE_FORM_RESIDUAL: f64 = 1e-5;

/// Closed-form space-form curvature values must match the numerically
/// computed partial Ricci traces this closely.
pub const CLOSED_FORM_MATCH: f64 = 1e-5;

/// Default verdict tolerances, overridable per run.
pub const DEFAULT_TOL_SLACK: f64 = 1e-8;
pub const DEFAULT_TOL_IDENTITY: f64 = 1e-6;
pub const DEFAULT_TOL_EQUALITY: f64 = 1e-8;
