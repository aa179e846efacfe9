//! Multi-transport distributional regression.
//!
//! Responses and predictors are probability distributions on a compact
//! interval. A prediction is the weighted Wasserstein barycenter of the
//! predictors (and a fixed reference) after each has been pushed through
//! its own monotone transport map:
//!
//! ```text
//! Q_pred = Σ_j α_j · T_j ∘ Q_{ξ_j},   α ∈ simplex,   T_j nondecreasing
//! ```
//!
//! The maps and weights are fitted by alternating weighted isotonic
//! regression with simplex-constrained least squares, see [`fit::fit`].

// `!(x > 0.0)` is used on purpose so that NaN fails validation.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod error;
pub mod fit;
pub mod io;
pub mod model;
pub mod monotone;
pub mod par;
pub mod quantile;
pub mod simulation;
pub mod solvers;

pub use error::{MtdrError, Result};
pub use fit::{assemble_tk_subproblem, fit, FitConfig, FitReport};
pub use model::{predictive_seminorm, DataSet, MtdrModel, Subject};
pub use monotone::{MonotoneMap, NodeGrid};
pub use par::Execution;
pub use quantile::{Domain, ProbGrid, QuantileGrid};
pub use solvers::SimplexWeights;
