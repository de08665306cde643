//! # wcone
//!
//! A desk-scale numerical laboratory for fiber-wise Wasserstein geometry over
//! the tangent bundle of `ℝ^d`.
//!
//! The library works exclusively with finitely supported probability measures,
//! which makes every optimal-transport problem an exact linear program and
//! every fiber-wise construction a finite computation. On top of the exact
//! solver it provides:
//!
//! - [`measures`]: weighted point clouds on `ℝ^d`, structured generators
//!   (atoms, DC-curve samples, absolutely-continuous grids), restriction and
//!   mixture algebra;
//! - [`ot`]: exact optimal transport for the squared Euclidean cost,
//!   cyclical-monotonicity checking, explicit Kantorovich potentials on
//!   chains, and plan surgery (extension, truncation);
//! - [`fields`]: measure fields `ξ ∈ P₂(TΩ)_μ` stored as one fiber
//!   distribution per base point, with barycenter/centering/scaling, the
//!   symmetric two-point fields `γ_f`, interpolation and doubling;
//! - [`fiber_geometry`]: the distance `W_μ` and metric scalar product
//!   `⟨·,·⟩_μ`, computed fiber by fiber;
//! - [`cones`]: closed convex cones of centred fields described by
//!   Grassmannian sections — membership, metric projection, section
//!   estimation, closedness regressions;
//! - [`dc`]: DC_k graph parametrizations with exact max-of-smooth convex
//!   oracles, tangent planes, subdifferential dimensions and the separating
//!   convex function with its selections;
//! - [`decomposition`]: the dimension-of-splitting decomposition of a
//!   measure, the max–min identification formula, splitting-direction
//!   estimation, a Chebyshev concentration bound, tangent-plane alignment and
//!   Preiss blow-ups;
//! - [`fixtures`]: the named test configurations used by the verification
//!   suites (segment, square boundary, labelled mixture, parabola,
//!   oscillating maps).
//!
//! All values are immutable after construction and safe to share across
//! threads.

pub mod cones;
pub mod dc;
pub mod decomposition;
pub mod fiber_geometry;
pub mod fields;
pub mod fixtures;
pub mod io;
pub mod measures;
pub mod numeric;
pub mod ot;

use thiserror::Error;

/// Errors produced by construction and the numerical operations.
#[derive(Debug, Error)]
pub enum Error {
    #[error("empty support: a measure needs at least one point of positive mass")]
    EmptySupport,

    #[error("length mismatch: {0} points vs {1} weights")]
    LengthMismatch(usize, usize),

    #[error("negative weight {0}")]
    NegativeWeight(f64),

    #[error("point dimension {found} differs from expected {expected}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("restriction has zero mass")]
    ZeroMassRestriction,

    #[error("weights sum to {0}, not a probability within 1e-12")]
    NotNormalized(f64),

    #[error("fields live over different bases")]
    BaseMismatch,

    #[error("field is not centred: max barycenter norm {0}")]
    NotCentred(f64),

    #[error("fiber atom count {0} exceeds the cap {1}")]
    FiberCapExceeded(usize, usize),

    #[error("interpolation parameter {0} outside [0, 1]")]
    InvalidLambda(f64),

    #[error("support is not cyclically monotone: violation {0}")]
    NotCyclicallyMonotone(f64),

    #[error("plan is not optimal between its marginals: cost {found} vs optimum {optimum}")]
    NotOptimal { found: f64, optimum: f64 },

    #[error("no target inside the closed ball of radius {0}")]
    NoTargetInBall(f64),

    #[error("coupling marginal defect {0} exceeds 1e-10")]
    CouplingMarginalDefect(f64),

    #[error("basis is not orthonormal: Gram defect {0}")]
    NotOrthonormal(f64),

    #[error("point does not lie on the chart (defect {0})")]
    OffChart(f64),

    #[error("chart has no normal direction (k = d)")]
    NoNormalDirection,

    #[error("unsupported convex representation for this operation: {0}")]
    UnsupportedRepresentation(&'static str),

    #[error("hypothesis failure: {0}")]
    HypothesisFailure(String),

    #[error("sequence is not Cauchy under the bundle distance (gap increases at step {0})")]
    NonCauchy(usize),

    #[error("candidate list is empty")]
    EmptyCandidates,

    #[error("ball around the blow-up center carries zero mass at scale {0}")]
    ZeroMassBall(f64),

    #[error("section dimension is not constant: found {0} and {1}")]
    NonConstantDimension(usize, usize),

    #[error("mixture components overlap at a support point")]
    OverlappingComponents,

    #[error("simplex did not terminate within the iteration cap")]
    SolverStalled,

    #[error("invalid descriptor: {0}")]
    Descriptor(String),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

/// Convenience alias used across the crate.
pub type Result<T> = std::result::Result<T, Error>;
