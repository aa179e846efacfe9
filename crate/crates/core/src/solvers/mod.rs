//! Convex subproblem solvers used by the alternating fitter.

mod isotonic;
mod simplex;

pub use isotonic::{weighted_isotonic, IsotonicProblem};
pub use simplex::{
    simplex_least_squares, simplex_least_squares_from, simplex_project, SimplexLsProblem,
    SimplexWeights,
};
