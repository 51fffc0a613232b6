//! Mirror-descent-family optimization under generalized smoothness.
//!
//! The crate couples Bregman geometries (entropic simplex, Euclidean ball)
//! with link-function smoothness models in which the Hessian's induced norm
//! is bounded by a non-decreasing function ℓ of the gradient's dual norm.
//! From the initial suboptimality gap it derives the effective constants
//! (G, L) that drive the step-size rules of five algorithms: mirror descent,
//! accelerated mirror descent, optimistic mirror descent, mirror prox, and
//! stochastic mirror descent under state-dependent bounded noise. A profiler
//! estimates affine links empirically, and a harness runs configured
//! experiments with invariant checks, CSV/JSON artifacts and rate-slope
//! regression.

pub mod error;
pub mod geometry;
pub mod harness;
pub mod noise;
pub mod objectives;
pub mod optimizers;
pub mod oracle;
pub mod profiler;
pub mod smoothness;
pub(crate) mod vecmath;

pub use error::{CoreError, Result};
pub use geometry::{Domain, Geometry, NormPair, Point, PsiKind};
pub use noise::{NoiseModel, NoiseShape};
pub use objectives::{FStarEstimate, Objective, ObjectiveKind};
pub use optimizers::{
    run, Algorithm, EtaPolicy, IterationRecord, RunConfig, RunConstants, RunRecord,
};
pub use oracle::Oracle;
pub use profiler::{AffineFit, DimProfile, LinkSample, PairSelection, RatioFit};
pub use smoothness::{solve_effective, solve_g_bisection, EffectiveSmoothness, LinkFunction};
