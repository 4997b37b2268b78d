//! Robust algorithmic recourse for generalized linear models.
//!
//! A recourse `x` for an origin `x0` is priced by
//! `J(x, θ) = ℓ(θᵀx̃) + λ‖x − x0‖₁`, and the robust recourse minimizes the
//! worst price over models `θ` with `‖θ − θ0‖_p ≤ α`. For `p = 1` the inner
//! maximum is attained on `2(d+1)` candidate models, each owning a convex
//! region of recourses ([`solver::solve_algorithm1`]); for `p = ∞` a
//! coordinate-descent scheme solves the problem exactly
//! ([`solver::solve_algorithm2`]).
//!
//! The crate also ships a ROAR-style gradient baseline, a LIME-style linear
//! surrogate for non-linear classifiers, logistic-regression and MLP
//! training, a tabular data pipeline, evaluation metrics, brute-force
//! oracles, and the `robust-recourse` command-line tool.

pub mod adversary;
pub mod data;
pub mod error;
pub mod eval;
pub mod experiment;
pub mod geometry;
pub mod model;
pub mod oracle;
pub mod pipeline;
pub mod roar;
pub mod seed;
pub mod solver;
pub mod surrogate;
pub mod synthetic;
pub mod train;

pub use adversary::{worst_case_glm, AdversaryResult, DifferentiableScore, FlatParameterVector};
pub use error::{RecourseError, Result};
pub use eval::Algorithm;
pub use model::{FeatureVector, LinearModel, LossKind, Neighborhood, NormOrder, RecourseProblem, RecourseSolution};
pub use solver::{solve_algorithm1, solve_algorithm2, SubgradientConfig};
