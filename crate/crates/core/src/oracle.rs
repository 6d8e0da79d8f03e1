//! Exact solver on a two-point scenario tree.
//!
//! With increments `ΔW_{n,i} = ±√τ`, the `2^{N·m_w}` equally likely paths
//! form a complete tree whose depth-`n` nodes are the distinct histories up
//! to `t_n`. Attaching one control vector to each non-leaf node makes
//! adaptedness structural, and the cost becomes a finite-dimensional strictly
//! convex quadratic in those node controls. Its normal equations are
//! assembled from unit-control responses and solved densely.

use nalgebra::{DMatrix, DVector};

use crate::error::{Result, SlqError};
use crate::fem::FemVector;
use crate::forward::{solve_auxiliary, solve_forward, ControlPath, StatePath};
use crate::optimizer::{run_gradient_descent, GradientConfig};
use crate::problem::DiscreteProblem;
use crate::stochastics::{sample_two_point_path, NoisePath, TimeGrid};

/// Largest admissible `N·m_w`.
pub const MAX_TREE_BITS: usize = 14;
/// Largest admissible number of scalar unknowns (non-leaf nodes × dofs).
pub const MAX_UNKNOWNS: usize = 4096;

/// Node `(n, k)` is the history whose first `n·m_w` path bits are `k`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct NodeId {
    pub depth: usize,
    pub index: usize,
}

#[derive(Debug, Clone)]
pub struct ScenarioTree {
    grid: TimeGrid,
    noise_dim: usize,
    /// First node id of each depth in the flat numbering.
    offsets: Vec<usize>,
    paths: Vec<NoisePath>,
}

impl ScenarioTree {
    pub fn depth(&self) -> usize {
        self.grid.steps()
    }

    pub fn noise_dim(&self) -> usize {
        self.noise_dim
    }

    pub fn grid(&self) -> &TimeGrid {
        &self.grid
    }

    /// `2^{m_w}`.
    pub fn branching(&self) -> usize {
        1 << self.noise_dim
    }

    pub fn nodes_at(&self, depth: usize) -> usize {
        1 << (depth * self.noise_dim)
    }

    /// `Σ_{n=0}^{N} 2^{n·m_w}`.
    pub fn node_count(&self) -> usize {
        self.offsets[self.depth()] + self.nodes_at(self.depth())
    }

    /// Nodes carrying a control variable (depths `0..N`).
    pub fn control_node_count(&self) -> usize {
        self.offsets[self.depth()]
    }

    pub fn scenario_count(&self) -> usize {
        self.paths.len()
    }

    /// Probability of a node: uniform over the nodes of its depth.
    pub fn probability(&self, node: NodeId) -> f64 {
        1.0 / self.nodes_at(node.depth) as f64
    }

    pub fn flat_index(&self, node: NodeId) -> usize {
        self.offsets[node.depth] + node.index
    }

    pub fn parent(&self, node: NodeId) -> Option<NodeId> {
        (node.depth > 0).then(|| NodeId {
            depth: node.depth - 1,
            index: node.index & (self.nodes_at(node.depth - 1) - 1),
        })
    }

    /// Node at `depth` on the path of scenario `s`.
    pub fn node_of(&self, scenario: usize, depth: usize) -> NodeId {
        NodeId {
            depth,
            index: scenario & (self.nodes_at(depth) - 1),
        }
    }

    /// Increment `ΔW_n` on the edge entering `node` (depth ≥ 1).
    pub fn edge_increment(&self, node: NodeId) -> &[f64] {
        assert!(node.depth > 0, "the root has no incoming edge");
        self.paths[node.index].increment(node.depth - 1)
    }

    pub fn path(&self, scenario: usize) -> &NoisePath {
        &self.paths[scenario]
    }

    pub fn paths(&self) -> &[NoisePath] {
        &self.paths
    }
}

/// Enumerates the complete two-point tree on `grid` with `noise_dim` components.
pub fn build_tree(grid: &TimeGrid, noise_dim: usize) -> Result<ScenarioTree> {
    let bits = grid.steps() * noise_dim;
    if noise_dim == 0 || bits > MAX_TREE_BITS {
        return Err(SlqError::TreeTooLarge(format!(
            "N·m_w = {bits} (must be between 1 and {MAX_TREE_BITS})"
        )));
    }
    let mut offsets = Vec::with_capacity(grid.steps() + 1);
    let mut acc = 0;
    for n in 0..=grid.steps() {
        offsets.push(acc);
        acc += 1usize << (n * noise_dim);
    }
    let paths = (0..1u64 << bits)
        .map(|s| sample_two_point_path(s, grid, noise_dim))
        .collect::<Result<Vec<_>>>()?;
    Ok(ScenarioTree {
        grid: *grid,
        noise_dim,
        offsets,
        paths,
    })
}

#[derive(Debug, Clone)]
pub struct ExactSolution {
    /// One control per non-leaf node, flat numbering.
    pub controls: Vec<FemVector>,
    /// State `(x1, x2)` at each node, flat numbering.
    pub states: Vec<(FemVector, FemVector)>,
    /// Expected total cost.
    pub cost: f64,
    /// `max_node ‖G(node)‖_{L²}` for the Riesz gradient `G` of the tree cost
    /// in `⟨u, v⟩ = Σ_node P(node)·τ·⟨u_node, v_node⟩`.
    pub first_order_residual: f64,
}

impl ExactSolution {
    /// Control realized along scenario `s`.
    pub fn scenario_control(&self, tree: &ScenarioTree, scenario: usize) -> ControlPath {
        scenario_control(&self.controls, tree, scenario)
    }
}

fn check_tree(problem: &DiscreteProblem, tree: &ScenarioTree) -> Result<()> {
    if tree.depth() != problem.steps() || tree.noise_dim() != problem.noise_dim() {
        return Err(SlqError::InvalidData(format!(
            "tree (N = {}, m_w = {}) does not match problem (N = {}, m_w = {})",
            tree.depth(),
            tree.noise_dim(),
            problem.steps(),
            problem.noise_dim()
        )));
    }
    let unknowns = tree.control_node_count() * problem.dofs();
    if unknowns > MAX_UNKNOWNS {
        return Err(SlqError::TreeTooLarge(format!(
            "{unknowns} unknowns (limit {MAX_UNKNOWNS})"
        )));
    }
    Ok(())
}

/// Responses `x1` of the auxiliary system to unit controls, indexed
/// `[n·d_h + j]`.
fn unit_responses(problem: &DiscreteProblem, noise: &NoisePath) -> Result<Vec<Vec<FemVector>>> {
    let (steps, dofs) = (problem.steps(), problem.dofs());
    let mut out = Vec::with_capacity(steps * dofs);
    for n in 0..steps {
        for j in 0..dofs {
            let mut u = ControlPath::zeros(steps, dofs);
            u.u[n][j] = 1.0;
            out.push(solve_auxiliary(problem, &u, noise)?.x1);
        }
    }
    Ok(out)
}

/// Solves the adapted discrete problem exactly on `tree`.
pub fn solve_exact(problem: &DiscreteProblem, tree: &ScenarioTree) -> Result<ExactSolution> {
    check_tree(problem, tree)?;
    let (steps, dofs) = (problem.steps(), problem.dofs());
    let tau = problem.tau();
    let alpha = problem.data().alpha;
    let beta = problem.data().beta;
    let mass = problem.space().mass();
    let unknowns = tree.control_node_count() * dofs;
    let weight = 1.0 / tree.scenario_count() as f64;
    // Without multiplicative noise the responses are path independent.
    let shared = if problem.data().is_additive() {
        Some(unit_responses(problem, tree.path(0))?)
    } else {
        None
    };
    let pair = |a: &[FemVector], b: &[FemVector]| {
        tau * (0..steps).map(|k| mass.bilinear(&a[k], &b[k])).sum::<f64>()
            + beta * mass.bilinear(&a[steps], &b[steps])
    };

    // J(u) = ½·uᵀHu + bᵀu + c.
    let mut hessian = DMatrix::<f64>::zeros(unknowns, unknowns);
    let mut linear = DVector::<f64>::zeros(unknowns);
    let zero = ControlPath::zeros(steps, dofs);
    let mut columns = vec![0usize; steps * dofs];
    for (s, path) in tree.paths().iter().enumerate() {
        let own;
        let responses = match &shared {
            Some(r) => r,
            None => {
                own = unit_responses(problem, path)?;
                &own
            }
        };
        for n in 0..steps {
            let base = tree.flat_index(tree.node_of(s, n)) * dofs;
            for j in 0..dofs {
                columns[n * dofs + j] = base + j;
            }
        }
        let free = solve_forward(problem, &zero, path)?;
        let misfit: Vec<FemVector> = (0..=steps)
            .map(|k| free.x1[k].sub(problem.target_h(k)))
            .collect();
        for a in 0..steps * dofs {
            linear[columns[a]] += weight * pair(&misfit, &responses[a]);
            for b in a..steps * dofs {
                let mut h = pair(&responses[a], &responses[b]);
                let (na, ja, nb, jb) = (a / dofs, a % dofs, b / dofs, b % dofs);
                if na == nb {
                    h += alpha * tau * mass.get(ja, jb);
                }
                hessian[(columns[a], columns[b])] += weight * h;
                if a != b {
                    hessian[(columns[b], columns[a])] += weight * h;
                }
            }
        }
    }

    let cholesky = hessian
        .clone()
        .cholesky()
        .ok_or_else(|| SlqError::Internal("tree normal matrix is not positive definite".into()))?;
    let solution = cholesky.solve(&(-&linear));
    let controls: Vec<FemVector> = (0..tree.control_node_count())
        .map(|k| FemVector::from_vec(solution.as_slice()[k * dofs..(k + 1) * dofs].to_vec()))
        .collect();

    // Gradient coefficients H·u + b assemble P(node)·τ·M·G(node).
    let gradient = &hessian * &solution + &linear;
    let mut first_order_residual = 0.0_f64;
    for n in 0..steps {
        for index in 0..tree.nodes_at(n) {
            let node = NodeId { depth: n, index };
            let k = tree.flat_index(node);
            let scale = 1.0 / (tree.probability(node) * tau);
            let weak: Vec<f64> = gradient.as_slice()[k * dofs..(k + 1) * dofs]
                .iter()
                .map(|g| g * scale)
                .collect();
            let riesz = problem.space().mass_factor().solve(&weak);
            first_order_residual =
                first_order_residual.max(crate::linalg::dot(&weak, &riesz).max(0.0).sqrt());
        }
    }

    let mut states = vec![(FemVector::zeros(dofs), FemVector::zeros(dofs)); tree.node_count()];
    let mut cost = 0.0;
    for s in 0..tree.scenario_count() {
        let control = scenario_control(&controls, tree, s);
        let state = solve_forward(problem, &control, tree.path(s))?;
        cost += weight * crate::cost::cost_per_path(problem, &state, &control)?.total;
        store_states(tree, s, &state, &mut states);
    }
    Ok(ExactSolution {
        controls,
        states,
        cost,
        first_order_residual,
    })
}

fn scenario_control(controls: &[FemVector], tree: &ScenarioTree, scenario: usize) -> ControlPath {
    ControlPath {
        u: (0..tree.depth())
            .map(|n| controls[tree.flat_index(tree.node_of(scenario, n))].clone())
            .collect(),
    }
}

fn store_states(
    tree: &ScenarioTree,
    scenario: usize,
    state: &StatePath,
    out: &mut [(FemVector, FemVector)],
) {
    for n in 0..=tree.depth() {
        let k = tree.flat_index(tree.node_of(scenario, n));
        out[k] = (state.x1[n].clone(), state.x2[n].clone());
    }
}

#[derive(Debug, Clone)]
pub struct OracleComparison {
    /// Max over nodes and dofs of `|U_descent − U_exact|`.
    pub max_abs: f64,
    /// Max over nodes of `‖U_descent − U_exact‖_{L²}`.
    pub max_l2: f64,
    /// Largest final fixed-point residual over scenarios.
    pub descent_residual: f64,
    /// Gradient updates performed, maximized over scenarios.
    pub iterations: usize,
    /// Per-iteration fixed-point residual, maximized over scenarios.
    pub residual_history: Vec<f64>,
    pub exact: ExactSolution,
}

/// Runs the descent on every scenario of `tree`, checks that scenarios
/// sharing a history produce identical controls, and compares the node
/// controls with [`solve_exact`].
///
/// A residual-based stop fires at path-dependent iterations, so scenarios
/// that stop early are rerun to the largest iteration count; every scenario
/// then reports the same iterate `ℓ`.
pub fn compare_with_descent(
    problem: &DiscreteProblem,
    tree: &ScenarioTree,
    config: &GradientConfig,
) -> Result<OracleComparison> {
    if !problem.data().is_additive() {
        return Err(SlqError::MultiplicativeNoise);
    }
    let exact = solve_exact(problem, tree)?;
    let mut outcomes = tree
        .paths()
        .iter()
        .map(|w| run_gradient_descent(problem, w, config))
        .collect::<Result<Vec<_>>>()?;
    let iterations = outcomes.iter().map(|o| o.iterations()).max().unwrap_or(0);
    let fixed = config
        .clone()
        .with_max_iters(iterations)
        .with_residual_tol(0.0);
    for (s, outcome) in outcomes.iter_mut().enumerate() {
        if outcome.iterations() != iterations {
            *outcome = run_gradient_descent(problem, tree.path(s), &fixed)?;
        }
    }

    let mut node_controls: Vec<Option<&FemVector>> = vec![None; tree.control_node_count()];
    let mut descent_residual = 0.0_f64;
    for (s, outcome) in outcomes.iter().enumerate() {
        descent_residual = descent_residual.max(*outcome.report.residuals.last().unwrap_or(&0.0));
        for (n, u) in outcome.control.u.iter().enumerate() {
            let node = tree.node_of(s, n);
            let slot = &mut node_controls[tree.flat_index(node)];
            match slot {
                Some(seen) => {
                    let gap = seen.sub(u).max_abs();
                    if gap > 0.0 {
                        return Err(SlqError::AdaptednessViolation {
                            node: format!("depth {}, history {}", node.depth, node.index),
                            gap,
                        });
                    }
                }
                None => *slot = Some(u),
            }
        }
    }
    let residual_history = (0..=iterations)
        .map(|l| {
            outcomes
                .iter()
                .map(|o| o.report.residuals.get(l).copied().unwrap_or(0.0))
                .fold(0.0, f64::max)
        })
        .collect();
    let mut max_abs = 0.0_f64;
    let mut max_l2 = 0.0_f64;
    for (got, want) in node_controls.iter().zip(&exact.controls) {
        let got = got.ok_or_else(|| SlqError::Internal("unvisited tree node".into()))?;
        let diff = got.sub(want);
        max_abs = max_abs.max(diff.max_abs());
        max_l2 = max_l2.max(problem.space().l2_norm(&diff));
    }
    Ok(OracleComparison {
        max_abs,
        max_l2,
        descent_residual,
        iterations,
        residual_history,
        exact,
    })
}
