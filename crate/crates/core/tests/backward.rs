mod common;

use std::f64::consts::PI;
use std::sync::Arc;

use common::*;
use slqwave::stochastics::{sample_gaussian_path, truncate_noise, RngConfig};
use slqwave::{
    residual_check, solve_artificial_backward, solve_forward, ControlPath, FemVector, SlqError,
};

fn random_states(p: &slqwave::DiscreteProblem, seed: u64) -> Vec<FemVector> {
    let mut g = rng(seed);
    random_control(&mut g, p.steps() + 1, p.dofs()).u
}

/// One interior node (`d_h = 1`), one step: both lines of the backward
/// system reduce to 2×2 systems solved here by Cramer's rule.
#[test]
fn scalar_one_step_instance_matches_cramer_elimination() {
    let mut data = smooth_data(0.1, 2.5, 1, 0.0, 0.0);
    data.horizon = 0.5;
    data.target = Arc::new(|t, x| (PI * x).sin() * (1.0 + 3.0 * t));
    let p = problem(data, 2, 1);
    let (tau, beta) = (0.5, 2.5);
    let (m, k) = (1.0 / 3.0, 4.0);
    let lap = -k / m;
    let x1 = vec![
        FemVector::from_vec(vec![0.3]),
        FemVector::from_vec(vec![-0.8]),
    ];
    let e0 = 1.0 - 0.3;
    let e1 = 2.5 + 0.8;

    let cramer = |a: [[f64; 2]; 2], b: [f64; 2]| {
        let det = a[0][0] * a[1][1] - a[0][1] * a[1][0];
        (
            (b[0] * a[1][1] - a[0][1] * b[1]) / det,
            (a[0][0] * b[1] - b[0] * a[1][0]) / det,
        )
    };
    // y1 − (τ/2)Δ y2 = β e,  −(τ/2) y1 + y2 = 0
    let a = [[1.0, -0.5 * tau * lap], [-0.5 * tau, 1.0]];
    let (y1n, y2n) = cramer(a, [beta * e1, 0.0]);
    // y1₀ − (τ/2)Δ y2₀ = y1₁ + (τ/2)Δ y2₁ + τ e₀,  −(τ/2) y1₀ + y2₀ = y2₁ + (τ/2) y1₁
    let (y10, y20) = cramer(
        a,
        [
            y1n + 0.5 * tau * lap * y2n + tau * e0,
            y2n + 0.5 * tau * y1n,
        ],
    );

    let adj = solve_artificial_backward(&p, &x1, 0).unwrap();
    for (got, want) in [
        (adj.y1[1][0], y1n),
        (adj.y2[1][0], y2n),
        (adj.y1[0][0], y10),
        (adj.y2[0][0], y20),
    ] {
        assert!(
            (got - want).abs() < 1e-13 * want.abs().max(1.0),
            "{got} vs {want}"
        );
    }
}

#[test]
fn matching_target_gives_zero_adjoint() {
    let p = problem(smooth_data(0.1, 4.0, 1, 0.0, 0.0), 12, 9);
    let adj = solve_artificial_backward(&p, p.target_path(), 0).unwrap();
    assert!(adj.y1.iter().chain(&adj.y2).all(|v| v.max_abs() == 0.0));
}

#[test]
fn zero_terminal_weight_gives_zero_terminal_pair() {
    let p = problem(smooth_data(0.1, 0.0, 1, 0.0, 0.0), 12, 9);
    let x1 = random_states(&p, 1);
    let adj = solve_artificial_backward(&p, &x1, 0).unwrap();
    assert_eq!(adj.y1[9].max_abs(), 0.0);
    assert_eq!(adj.y2[9].max_abs(), 0.0);
    assert!(adj.y1[0].max_abs() > 0.0);
}

#[test]
fn terminal_pair_satisfies_its_coupling() {
    let p = problem(smooth_data(0.1, 3.0, 1, 0.0, 0.0), 16, 10);
    let adj = solve_artificial_backward(&p, &random_states(&p, 2), 0).unwrap();
    let r = adj.y2[10].sub(&adj.y1[10].scaled(0.5 * p.tau()));
    assert!(p.space().l2_norm(&r) < 1e-14 * p.space().l2_norm(&adj.y1[10]).max(1.0));
}

#[test]
fn unreduced_equations_hold_after_the_solve() {
    let p = problem(smooth_data(0.1, 3.0, 2, 1.0, 0.0), 30, 25);
    for start in [0, 7, 25] {
        let x1 = random_states(&p, 3 + start as u64);
        let adj = solve_artificial_backward(&p, &x1, start).unwrap();
        let scale = adj.y1.iter().map(|v| v.max_abs()).fold(1.0, f64::max);
        assert!(residual_check(&adj, &x1, &p).unwrap() < 1e-10 * scale);
        assert!(adj.y1[..start].iter().all(|v| v.max_abs() == 0.0));
    }
}

#[test]
fn residual_detects_a_perturbed_entry() {
    let p = problem(smooth_data(0.1, 3.0, 1, 0.0, 0.0), 20, 10);
    let x1 = random_states(&p, 4);
    let mut adj = solve_artificial_backward(&p, &x1, 0).unwrap();
    let clean = residual_check(&adj, &x1, &p).unwrap();
    adj.y2[4][10] += 1.0;
    let dirty = residual_check(&adj, &x1, &p).unwrap();
    assert!(clean < 1e-10 && dirty > 1e-2, "{clean} {dirty}");
}

#[test]
fn residual_of_zero_adjoint_measures_the_source() {
    let p = problem(smooth_data(0.1, 0.0, 1, 0.0, 0.0), 20, 10);
    let x1 = random_states(&p, 5);
    let adj = slqwave::AdjointPath {
        y1: vec![p.space().zeros(); 11],
        y2: vec![p.space().zeros(); 11],
        start: 0,
    };
    // y1 line residual at `n` is τ‖x̃[n] − x1[n]‖.
    let want = (0..10)
        .map(|n| p.tau() * p.space().l2_norm(&p.target_h(n).sub(&x1[n])))
        .fold(0.0, f64::max);
    let got = residual_check(&adj, &x1, &p).unwrap();
    assert!((got - want).abs() < 1e-12 * want);
}

#[test]
fn adjoint_is_linear_in_the_misfit() {
    let p = problem(smooth_data(0.1, 2.0, 1, 0.0, 0.0), 16, 12);
    let (a, b) = (random_states(&p, 6), random_states(&p, 7));
    // With x̃ fixed, e = x̃ − x1 is affine in x1; compare misfit-level combinations.
    let tgt = p.target_path();
    let mix = |w: f64, v: f64| -> Vec<FemVector> {
        (0..=12)
            .map(|n| {
                let ea = tgt[n].sub(&a[n]);
                let eb = tgt[n].sub(&b[n]);
                let e: Vec<f64> = ea
                    .iter()
                    .zip(eb.iter())
                    .map(|(x, y)| w * x + v * y)
                    .collect();
                tgt[n].sub(&e)
            })
            .collect()
    };
    let ya = solve_artificial_backward(&p, &mix(1.0, 0.0), 0).unwrap();
    let yb = solve_artificial_backward(&p, &mix(0.0, 1.0), 0).unwrap();
    let yc = solve_artificial_backward(&p, &mix(2.0, -3.0), 0).unwrap();
    for n in 0..=12 {
        let want: Vec<f64> = ya.y2[n]
            .iter()
            .zip(yb.y2[n].iter())
            .map(|(x, y)| 2.0 * x - 3.0 * y)
            .collect();
        assert!(yc.y2[n].sub(&want).max_abs() < 1e-12 * (1.0 + yc.y2[n].max_abs()));
    }
}

#[test]
fn deterministic_adjoint_is_identical_across_conditioning_indices() {
    let p = problem(smooth_data(0.1, 2.0, 2, 0.0, 0.0), 16, 8);
    let noise = sample_gaussian_path(RngConfig::new(3, 0), p.grid(), 2);
    let u = ControlPath::zeros(8, p.dofs());
    let full = solve_forward(&p, &u, &noise).unwrap();
    let reference = solve_artificial_backward(&p, &full.x1, 0).unwrap();
    for m in 0..=8 {
        let xm = solve_forward(&p, &u, &truncate_noise(&noise, m)).unwrap();
        let ym = solve_artificial_backward(&p, &xm.x1, m).unwrap();
        assert_eq!(max_diff(&ym.y2[m..], &reference.y2[m..]), 0.0);
    }
}

#[test]
fn invalid_start_and_shapes_are_rejected() {
    let p = problem(smooth_data(0.1, 2.0, 1, 0.0, 0.0), 8, 4);
    let x1 = random_states(&p, 9);
    assert!(matches!(
        solve_artificial_backward(&p, &x1, 5),
        Err(SlqError::IndexOutOfRange { .. })
    ));
    assert!(is_shape_error(solve_artificial_backward(&p, &x1[..4], 0)));
}
