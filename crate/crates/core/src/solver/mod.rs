//! Robust recourse solvers: candidate decomposition for `p ≠ ∞` and
//! coordinate descent for `p = ∞`.

mod linf;
mod lp;

pub use linf::{
    solve_1d_update, solve_algorithm2, solve_algorithm2_detailed, Algorithm2Report, Step1d, UNBOUNDED_STEP,
};
pub use lp::{
    solve_algorithm1, solve_algorithm1_detailed, solve_candidate_subproblem, Algorithm1Report, CandidateSolution,
    ConeProjection, SubgradientConfig, SubproblemMethod,
};
