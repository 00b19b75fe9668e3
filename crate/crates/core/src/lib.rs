//! Decides whether a spray, a homogeneous system of second-order ODEs
//! written as x''^i = -2G^i(x, x'), is the geodesic spray of a Finsler
//! function of constant flag curvature, and reconstructs the Finsler
//! energy when it is.
//!
//! The pipeline has five stages:
//!
//! 1. [`dsl`] parses the closed-form coefficient expressions.
//! 2. [`jet`] evaluates them as truncated Taylor expansions, so every
//!    mixed partial derivative the curvature objects need is exact to
//!    rounding.
//! 3. [`geom`] assembles the curvature data at a point: the nonlinear
//!    connection, the Jacobi endomorphism, the Ricci scalar, and the
//!    derivations d_J and d_h applied to them.
//! 4. [`checks`] samples the constrained domain and tests the
//!    metrizability conditions, producing a [`checks::MetrizabilityVerdict`].
//! 5. [`finsler`] reconstructs the candidate energy F^2 = sign(R) R,
//!    verifies it, and conversely builds the geodesic spray of a given
//!    Finsler function.
//!
//! [`gallery`] holds built-in example definitions, and [`report`] the
//! serializable report emitted by the command-line front end.

use thiserror::Error;

pub mod checks;
pub mod dsl;
pub mod finsler;
pub mod gallery;
pub mod geom;
pub mod jet;
pub mod report;

/// Scalar types the expression evaluator and the jet arithmetic are
/// generic over.
///
/// Implemented by `f32` and `f64`. The geometry layers above the jet
/// engine are pinned to `f64`, matching the tolerances in
/// [`checks::Tolerances`].
pub trait Scalar:
    num_traits::real::Real
    + num_traits::FromPrimitive
    + num_traits::ToPrimitive
    + std::fmt::Debug
    + 'static
{
}

impl<T> Scalar for T where
    T: num_traits::real::Real
        + num_traits::FromPrimitive
        + num_traits::ToPrimitive
        + std::fmt::Debug
        + 'static
{
}

/// Jet over the default `f64` scalar used by the geometry pipeline.
pub type Jet64 = jet::Jet<f64>;

/// Any failure surfaced by the pipeline.
#[derive(Debug, Error)]
pub enum Error {
    #[error(transparent)]
    Parse(#[from] dsl::ParseError),

    #[error(transparent)]
    File(#[from] dsl::FileError),

    #[error(transparent)]
    Eval(#[from] dsl::EvalError),

    #[error(transparent)]
    JetOp(#[from] jet::JetOpError),

    #[error("point has {found} coordinates but the definition has dimension {dim} (expected {expected})")]
    PointLength { dim: usize, expected: usize, found: usize },

    #[error("metric tensor is singular or ill-conditioned at {point:?} (condition number {cond:.3e})")]
    SingularMetric { point: Vec<f64>, cond: f64 },

    #[error("`{name}`: coefficients are not 2-homogeneous in y (residual {residual:.3e} at {point:?})")]
    Inhomogeneous { name: String, residual: f64, point: Vec<f64> },

    #[error("`{name}`: deformation term is not 1-homogeneous in y (residual {residual:.3e} at {point:?})")]
    InhomogeneousDeformation { name: String, residual: f64, point: Vec<f64> },

    #[error("Ricci scalar changes sign across the sample for `{name}`; constant-curvature reconstruction is undefined")]
    SignChange { name: String },

    #[error("`{name}`: F^2 = {value:.3e} at {point:?} is too small for the Einstein quotient")]
    DegenerateEnergy { name: String, value: f64, point: Vec<f64> },

    #[error("no point satisfied the constraints of `{name}` after {attempts} attempts")]
    SamplingExhausted { name: String, attempts: usize },

    #[error("unknown example `{name}`; run `list` for the catalog")]
    UnknownExample { name: String },

    #[error("invalid parameter for `{name}`: {detail}")]
    BadParam { name: String, detail: String },
}
