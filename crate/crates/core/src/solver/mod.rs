//! LP relaxations and branch-and-bound over [`crate::model::MipModel`].

mod bnb;
mod lp;

pub use bnb::{solve_mip, solve_mip_with, BnbConfig, Heuristic, MipResult, MipStatus};
pub use lp::{solve_lp, LpError, LpSession, LpSolution, LpStatus, SolverError, TOL_LP};
