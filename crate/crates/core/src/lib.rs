//! Graphical mean curvature flow on model hypersurfaces.
//!
//! The crate solves the normal-graph form of mean curvature flow over bases
//! with exactly known geometry (circle, periodic line, periodic plane, round
//! sphere) by the mild-solution route: exact series heat kernels, a Duhamel
//! space-time convolution, and Picard iteration in parabolic function spaces.
//! Alongside the solver it ships the measurement tools that certify the
//! estimates the construction leans on: Gaussian kernel bounds, quadratic
//! nonlinearity bounds, operator norms, contraction ratios, and an
//! independent finite-difference oracle for cross-validation.
//!
//! All numerics are generic over the scalar type via [`scalar::Real`];
//! `f64` aliases are exported below.

pub mod duhamel;
pub mod error;
pub mod field;
pub mod fixedpoint;
pub mod geometry;
pub mod graph_calculus;
pub mod heat_kernels;
pub mod oracle;
pub mod parabolic_norms;
pub mod scalar;
pub mod spectral;

pub use error::{Error, Result};
pub use scalar::Real;

/// `f64` aliases for the common case.
pub type BaseGeometry64 = geometry::BaseGeometry<f64>;
pub type EvolvingGeometry64 = geometry::EvolvingGeometry<f64>;
pub type GraphFunction64 = field::GraphFunction<f64>;
pub type SpaceTimeField64 = field::SpaceTimeField<f64>;
pub type KernelEvaluator64 = heat_kernels::KernelEvaluator<f64>;
pub type DuhamelOperator64 = duhamel::DuhamelOperator<f64>;
pub type PicardConfig64 = fixedpoint::PicardConfig<f64>;
pub type FlowSolution64 = fixedpoint::FlowSolution<f64>;
