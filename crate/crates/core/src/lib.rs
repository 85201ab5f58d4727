//! Numerical verification engine for curvature bounds of Riemannian
//! submersions and Riemannian maps, built on explicit coordinate charts.
//!
//! The pipeline: metric and map components are coordinate expressions
//! ([`expr`]); curvature comes from exact second-order jets ([`manifold`]);
//! orthonormal split frames, the fundamental tensors of a submersion, and
//! their invariants live in [`submersion`]; the algebraic lower bound they
//! are measured against lives in [`hineva`]; the inequality verdicts in
//! [`inequality`] and [`map`]; ready-made geometries in [`scenario`]; and the
//! deterministic run/report layer in [`report`].

pub mod error;
pub mod expr;
pub mod frame;
pub mod hineva;
pub mod inequality;
pub mod manifold;
pub mod map;
pub mod report;
pub mod sample;
pub mod scenario;
pub mod submersion;
pub mod tensor;
pub mod tol;

pub use error::GeomError;
pub use expr::{Expression, ExprError};
pub use manifold::{ChartManifold, CurvatureTensor, SignConvention};
pub use tensor::{Tensor3, Tensor4};
