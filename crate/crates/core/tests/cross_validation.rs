//! Cross-validation of the two solution paths: the Picard fixed point of
//! the mild formulation against the method-of-lines solver, plus the
//! curvature histories of perturbed runs.

use std::sync::Arc;

use gmcf::field::{random_graph, GraphFunction, SpaceTimeField};
use gmcf::fixedpoint::{solve_existence, solve_perturbation, PicardConfig};
use gmcf::geometry::{make_base, EvolvingGeometry, GeometryKind};
use gmcf::oracle::{curvature_history, fd_solve, ExactKind, ExactSolution};

fn circle(n: usize) -> Arc<gmcf::BaseGeometry64> {
    make_base(GeometryKind::Circle, 1, 1.0, n).unwrap()
}

/// Uniform difference between the fixed point (height over the static base)
/// and the finite-difference run, sampled at the coarse grid's nodes.
fn uniform_gap(fixed: &SpaceTimeField<f64>, fd: &SpaceTimeField<f64>) -> f64 {
    let stride = (fd.num_slices() - 1) / (fixed.num_slices() - 1);
    let mut worst: f64 = 0.0;
    for j in 0..fixed.num_slices() {
        let a = fixed.slice(j);
        let b = fd.slice(j * stride);
        for i in 0..a.len() {
            worst = worst.max((a[i] - b[i]).abs());
        }
    }
    worst
}

#[test]
fn existence_matches_oracle_on_the_circle() {
    let g = circle(64);
    let mut cfg = PicardConfig::new(0.05, 0.3);
    cfg.intervals = 64;
    let sol = solve_existence(&g, &cfg).unwrap();
    let fd = fd_solve(&g, &GraphFunction::zero(g.clone()), 0.05, 512).unwrap();
    let gap = uniform_gap(&sol.field, &fd);
    assert!(gap < 1e-3, "solver disagreement {gap}");
}

#[test]
fn existence_matches_oracle_on_the_flat_line() {
    let line = make_base::<f64>(GeometryKind::PeriodicLine, 1, 2.0 * std::f64::consts::PI, 64)
        .unwrap();
    let cfg = PicardConfig::new(0.05, 0.4);
    let sol = solve_existence(&line, &cfg).unwrap();
    let fd = fd_solve(&line, &GraphFunction::zero(line.clone()), 0.05, 256).unwrap();
    let gap = uniform_gap(&sol.field, &fd);
    assert!(gap < 1e-10, "both must sit at the static plane, gap {gap}");
}

#[test]
fn small_sphere_existence_matches_exact() {
    let sph = make_base::<f64>(GeometryKind::Sphere, 2, 1.0, 32).unwrap();
    let mut cfg = PicardConfig::new(0.02, 0.3);
    cfg.intervals = 64;
    let sol = solve_existence(&sph, &cfg).unwrap();
    let exact = ExactSolution::new(ExactKind::ShrinkingSphere, 1.0);
    let mut worst: f64 = 0.0;
    for (j, &t) in sol.field.times().iter().enumerate() {
        let e = exact.eval(t).unwrap();
        for v in sol.field.slice(j) {
            worst = worst.max((v - e).abs());
        }
    }
    assert!(worst < 1e-3, "sphere error {worst}");
}

#[test]
fn perturbation_matches_oracle_on_random_data() {
    let base = circle(64);
    let horizon = 0.04;
    let ev = Arc::new(EvolvingGeometry::new(base.clone(), horizon).unwrap());
    let mut cfg = PicardConfig::new(horizon, 0.3);
    cfg.intervals = 64;
    cfg.smallness = Some(0.2);

    for seed in [3u64, 4, 5] {
        let raw = random_graph(&base, 6, seed);
        let scale = 0.01 / raw.sup_norm();
        let u0 = raw.scaled(scale);
        let sol = solve_perturbation(&ev, &u0, &cfg).unwrap();
        let fd = fd_solve(&base, &u0, horizon, 512).unwrap();

        // compare the curves themselves: R(t) + u_pert vs 1 + u_fd
        let stride = (fd.num_slices() - 1) / (sol.field.num_slices() - 1);
        let mut worst: f64 = 0.0;
        for (j, &t) in sol.field.times().iter().enumerate() {
            let r_t = ev.radius(t).unwrap();
            let a = sol.field.slice(j);
            let b = fd.slice(j * stride);
            for i in 0..a.len() {
                worst = worst.max((r_t + a[i] - (1.0 + b[i])).abs());
            }
        }
        assert!(worst < 1e-3, "seed {seed}: disagreement {worst}");
    }
}

#[test]
fn perturbed_circle_curvature_estimates() {
    // run u0 = 1e-2 cos(3 theta) and instantiate the short-time curvature
    // persistence bound sup |A| <= 2 kappa(0) and the first-derivative decay
    // sup_t |grad A|^2 / (kappa^2 (1 + 1/t)) finite and refinement-stable
    let base = circle(64);
    let horizon = 0.04;
    let u0 = GraphFunction::from_fn(base.clone(), |th, _| 1e-2 * (3.0 * th).cos());

    let run = |steps: usize| {
        let fd = fd_solve(&base, &u0, horizon, steps).unwrap();
        curvature_history(&fd, |_| Ok(1.0)).unwrap()
    };
    let hist = run(512);

    let kappa0 = hist.sup_a[0];
    let sup_a = hist.sup_a.iter().cloned().fold(0.0f64, f64::max);
    assert!(
        sup_a <= 2.0 * kappa0,
        "curvature grew past the persistence bound: {sup_a} vs {kappa0}"
    );

    let fitted = |h: &gmcf::oracle::CurvatureHistory<f64>| {
        let mut c: f64 = 0.0;
        for (j, &t) in h.times.iter().enumerate() {
            if t == 0.0 {
                continue;
            }
            let bound = kappa0 * kappa0 * (1.0 + 1.0 / t);
            c = c.max(h.sup_grad_a[j] * h.sup_grad_a[j] / bound);
        }
        c
    };
    let c1 = fitted(&hist);
    assert!(c1.is_finite() && c1 > 0.0);
    let c2 = fitted(&run(1024));
    assert!(
        (c1 - c2).abs() / c1 < 0.10,
        "fitted constant unstable under refinement: {c1} vs {c2}"
    );
}

#[test]
fn concentric_difference_through_both_solvers() {
    let base = circle(64);
    let horizon = 0.05;
    let ev = Arc::new(EvolvingGeometry::new(base.clone(), horizon).unwrap());
    let mut cfg = PicardConfig::new(horizon, 0.3);
    cfg.intervals = 64;
    cfg.smallness = Some(0.2);
    let x = 0.05;
    let exact = ExactSolution::concentric(1.0, 1.0 + x);

    let sol = solve_perturbation(&ev, &GraphFunction::constant(base.clone(), x), &cfg).unwrap();
    for (j, &t) in sol.field.times().iter().enumerate() {
        let e = exact.eval(t).unwrap();
        for v in sol.field.slice(j) {
            assert!((v - e).abs() < 1e-3);
        }
    }
}
