//! Dense interior-point solver for linear and second-order cone programs.
//!
//! Problems are posed as `min c^T x  s.t.  G x + s = h,  s in K`, where `K`
//! is a nonnegative orthant followed by any number of second-order cones.

pub mod cones;
pub mod linalg;
mod scaling;
pub mod solver;

pub use cones::ConeSpec;
pub use linalg::Matrix;
pub use solver::{
    solve, solve_from, InitialPoint, Problem, ProblemError, Settings, Solution, Status,
};
