//! Fully discrete stochastic linear–quadratic control of the wave equation.
//!
//! P1 finite elements on `(0, L)` with homogeneous Dirichlet data, the
//! implicit midpoint rule in time, and a gradient descent whose conditional
//! expectations are evaluated exactly through artificial iterates when the
//! noise is additive. A scenario-tree solver provides exact references on
//! tiny instances.

// Negated comparisons are how NaN inputs get rejected.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod backward;
pub mod cost;
pub mod error;
pub mod experiments;
pub mod fem;
pub mod forward;
pub mod linalg;
pub mod optimizer;
pub mod oracle;
pub mod presets;
pub mod problem;
pub mod stochastics;

pub use backward::{residual_check, solve_artificial_backward, AdjointPath};
pub use cost::{
    cost_per_path, directional_derivative, empirical_cost, mean_cost, monte_carlo_cost,
    CostBreakdown,
};
pub use error::{Result, SlqError};
pub use fem::{FemSpace, FemVector, Mesh1D};
pub use forward::{energy, solve_auxiliary, solve_forward, ControlPath, StatePath};
pub use optimizer::{
    fixed_point_residual, lipschitz_bound, run_gradient_descent, run_gradient_descent_with,
    ArtificialGrid, DescentOutcome, GradientConfig, IterationReport,
};
pub use oracle::{build_tree, compare_with_descent, solve_exact, ExactSolution, ScenarioTree};
pub use problem::{DiscreteProblem, ProblemData};
pub use stochastics::{
    coarsen_path, sample_gaussian_path, sample_two_point_path, truncate_noise, NoisePath,
    RngConfig, TimeGrid,
};
