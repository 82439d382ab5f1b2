//! Path tracking for nonlinear parametric systems `F(u, p) = 0` with
//! bifurcation detection.
//!
//! The adaptive tracker solves an augmented system whose last row blends a
//! parameter step with a step along the critical eigenvector, so it slows down
//! in `p` and keeps moving in `u` as the Jacobian approaches singularity. Near
//! a singular point the Puiseux endgame extrapolates the bifurcation, the
//! tangent cone gives the outgoing directions and new branches are seeded
//! from them. A trial-and-error tracker is included as the comparison baseline.
//!
//! Everything numerical is generic over [`Scalar`] (`f32` or `f64`); the
//! aliases below fix the common `f64` instantiations.

pub mod adaptive;
pub mod baseline;
pub mod inflation;
pub mod linalg;
pub mod model;
pub mod pde;
pub mod pipeline;
pub mod pse;
pub mod report;
mod scalar;
pub mod tangent_cone;

pub use scalar::{from_usize, lit, to_f64, Scalar};

pub type Matrix = linalg::DenseMatrix<f64>;
pub type Matrix32 = linalg::DenseMatrix<f32>;
pub type PathPoint = adaptive::PathPoint<f64>;
pub type TrackerConfig = adaptive::TrackerConfig<f64>;
pub type BaselineConfig = baseline::BaselineConfig<f64>;
pub type RunConfig = pipeline::RunConfig<f64>;
pub type RunReport = report::RunReport<f64>;
pub type BifurcationRecord = pse::BifurcationRecord<f64>;
pub type System = dyn model::ParametricSystem<f64>;
