//! Fixtures shared by the benchmarks.

use slqwave::experiments::sample_path;
use slqwave::presets::{example1, EXAMPLE1_SETTINGS};
use slqwave::{ControlPath, DiscreteProblem, NoisePath};

/// The `example1` problem on `cells` cells with its usual 60 time steps,
/// plus the Brownian path of sample 0 under seed 1.
pub fn example1_fixture(cells: usize) -> (DiscreteProblem, NoisePath) {
    let problem = DiscreteProblem::new(example1(1.0), cells, EXAMPLE1_SETTINGS.steps)
        .expect("example1 discretizes");
    let noise = sample_path(&problem, 1, 0);
    (problem, noise)
}

/// A smooth nonzero control, `u_n(x_j) = sin(n + j)`.
pub fn wavy_control(problem: &DiscreteProblem) -> ControlPath {
    let mut u = ControlPath::zeros(problem.steps(), problem.dofs());
    for (n, un) in u.u.iter_mut().enumerate() {
        for (j, v) in un.iter_mut().enumerate() {
            *v = ((n + j) as f64).sin();
        }
    }
    u
}
