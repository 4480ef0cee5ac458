//! Finite-difference HJB/Kolmogorov solver against heat kernels, closed forms
//! and the Riccati solution.

use meanfield::emissions::{classify_regime, optimal_feedback, value_function, EmissionsModel};
use meanfield::lqmodel::{LQModelSpec, MeanFlow, TimeGrid};
use meanfield::mfg_lq::{solve_mfg, MfgOptions};
use meanfield::mfg_pde_oracle::{
    initial_density, picard_solve, solve_hjb, solve_kolmogorov, write_grids_csv, AdditiveRunningCost, PicardOptions,
    SpaceGrid,
};
use meanfield::normal::pdf;
use meanfield::scalar_examples::{additive_running_flow, Mode};
use meanfield::SolveError;

fn l1_to_gaussian(values: &[f64], space: &SpaceGrid, mean: f64, var: f64) -> f64 {
    let sd = var.sqrt();
    values
        .iter()
        .enumerate()
        .map(|(i, m)| (m - pdf((space.x(i) - mean) / sd) / sd).abs())
        .sum::<f64>()
        * space.dx()
}

#[test]
fn zero_drift_density_is_the_heat_kernel() {
    let (x0, sigma) = (0.3, 0.8);
    let time = TimeGrid::new(1.0, 200).unwrap();
    let space = SpaceGrid::around(x0, sigma, 1.0, 0.0, 400).unwrap();
    let drift = vec![vec![0.0; space.n_x()]; time.n_nodes()];
    let init = initial_density(&space, x0);
    let path = solve_kolmogorov(&drift, sigma, &time, &space, init).unwrap();
    let w2 = 4.0 * space.dx() * space.dx();
    // The L¹ gap shrinks like (dx² + dt)/t; once the spread covers a few
    // dozen cells it is well inside 10⁻³.
    for k in [100, 200] {
        let t = time.t(k);
        let err = l1_to_gaussian(&path.values[k], &space, x0, sigma * sigma * t + w2);
        assert!(err < 1e-3, "L1 error {err} at t={t}");
        assert!((path.mass(k) - 1.0).abs() < 1e-12);
        assert!(path.values[k].iter().all(|&m| m >= 0.0));
    }
}

#[test]
fn constant_drift_shifts_the_mean() {
    let (x0, sigma, c) = (0.0, 0.5, -0.7);
    let time = TimeGrid::new(1.0, 200).unwrap();
    let space = SpaceGrid::around(x0, sigma, 1.0, 1.0, 400).unwrap();
    let drift = vec![vec![c; space.n_x()]; time.n_nodes()];
    let path = solve_kolmogorov(&drift, sigma, &time, &space, initial_density(&space, x0)).unwrap();
    let w2 = 4.0 * space.dx() * space.dx();
    for k in [50, 200] {
        let t = time.t(k);
        assert!((path.mean(k) - (x0 + c * t)).abs() < 1e-3, "mean {} at t={t}", path.mean(k));
        let err = l1_to_gaussian(&path.values[k], &space, x0 + c * t, sigma * sigma * t + w2);
        assert!(err < 5e-3, "L1 error {err}");
        assert!((path.mass(k) - 1.0).abs() < 1e-12);
    }
}

#[test]
fn mass_is_conserved_under_confining_drift() {
    // Drift pushes mass into the walls; zero flux must keep it.
    let time = TimeGrid::new(2.0, 100).unwrap();
    let space = SpaceGrid::new(-1.0, 1.0, 100).unwrap();
    let drift: Vec<Vec<f64>> = (0..time.n_nodes())
        .map(|_| space.points().iter().map(|&x| 3.0 * x.signum()).collect())
        .collect();
    let path = solve_kolmogorov(&drift, 0.3, &time, &space, initial_density(&space, 0.1)).unwrap();
    for k in 0..time.n_nodes() {
        assert!((path.mass(k) - 1.0).abs() < 1e-12);
        assert!(path.values[k].iter().all(|&m| m >= 0.0));
    }
}

#[test]
fn additive_running_cost_matches_cosh_solution() {
    let model = AdditiveRunningCost {
        horizon: 1.0,
        x0: 1.0,
        sigma: 1.0,
    };
    let time = TimeGrid::new(1.0, 400).unwrap();
    let space = SpaceGrid::around(1.0, 1.0, 1.0, 1.0, 400).unwrap();
    let out = picard_solve(&model, time, &space, PicardOptions::default()).unwrap();
    assert!(out.converged && out.iterations() <= 50);
    let exact = additive_running_flow(time, 1.0, Mode::Mfg);
    let gap = out.mean_flow.sup_distance(&exact);
    assert!(gap < 1e-3, "sup gap {gap}");
}

#[test]
fn lq_oracle_matches_riccati_mean_and_feedback() {
    let model = LQModelSpec::simple(1.0, 1.0, 1.0, 1.0, 1.0, 400).build().unwrap();
    let sol = solve_mfg(&model, MfgOptions::default()).unwrap();
    let space = SpaceGrid::around(1.0, 1.0, 1.0, 1.0, 400).unwrap();
    let out = picard_solve(&model, *model.grid(), &space, PicardOptions::default()).unwrap();
    assert!(out.converged);
    assert!(out.mean_flow.sup_distance(&sol.mean_flow) < 1e-3);
    // ∂ₓv = η x + χ in the bulk; the feedback is −∂ₓv.
    let k = 200;
    let p = out.value.gradient(k);
    for i in (100..300).step_by(10) {
        let x = space.x(i);
        let alpha = sol.feedback.at_node(k, x);
        assert!((p[i] + alpha).abs() < 1e-3, "x={x}: {} vs {}", -p[i], alpha);
    }
}

#[test]
fn emissions_hjb_matches_closed_form() {
    let m = EmissionsModel::new(1.0, 0.0, 1.0, 1.0, 2.0).unwrap();
    let time = TimeGrid::new(1.0, 400).unwrap();
    let mean_t = classify_regime(&m).mean_T;
    let flow = MeanFlow::constant(time, mean_t);
    let space = SpaceGrid::around(m.x0, m.sigma, m.horizon, 1.0, 400).unwrap();
    let v = solve_hjb(&m, &flow, &space).unwrap();
    let n = space.n_x();
    for k in [0, 200, 399] {
        let p = v.gradient(k);
        for i in n / 4..3 * n / 4 {
            let (t, x) = (time.t(k), space.x(i));
            let err = (v.values[k][i] - value_function(&m, t, x).unwrap()).abs();
            assert!(err < 1e-3, "v error {err} at t={t} x={x}");
            // One step before maturity the kink is narrower than a cell.
            if k <= 200 {
                let perr = (p[i] - optimal_feedback(&m, t, x).unwrap()).abs();
                assert!(perr < 1e-2, "gradient error {perr} at t={t} x={x}");
            }
        }
    }
}

#[test]
fn coarse_time_steps_are_refused() {
    let model = LQModelSpec::simple(3.0, 0.0, 1.0, 1.0, 1.0, 10).build().unwrap();
    let flow = MeanFlow::constant(*model.grid(), 1.0);
    let space = SpaceGrid::around(1.0, 1.0, 1.0, 1.0, 400).unwrap();
    assert!(matches!(solve_hjb(&model, &flow, &space), Err(SolveError::Cfl { .. })));
}

#[test]
fn picard_flags_non_convergence() {
    let model = AdditiveRunningCost {
        horizon: 1.0,
        x0: 1.0,
        sigma: 1.0,
    };
    let time = TimeGrid::new(1.0, 100).unwrap();
    let space = SpaceGrid::around(1.0, 1.0, 1.0, 1.0, 100).unwrap();
    let opts = PicardOptions {
        damping: 0.5,
        tol: 1e-12,
        max_iter: 2,
    };
    let out = picard_solve(&model, time, &space, opts).unwrap();
    assert!(!out.converged);
    assert_eq!(out.iterations(), 2);
    assert!(picard_solve(&model, time, &space, PicardOptions { damping: 0.0, ..opts }).is_err());
}

#[test]
fn grid_csv_has_one_row_per_node() {
    let model = AdditiveRunningCost {
        horizon: 1.0,
        x0: 0.0,
        sigma: 1.0,
    };
    let time = TimeGrid::new(1.0, 20).unwrap();
    let space = SpaceGrid::around(0.0, 1.0, 1.0, 0.5, 60).unwrap();
    let out = picard_solve(&model, time, &space, PicardOptions::default()).unwrap();
    let mut buf = Vec::new();
    write_grids_csv(&mut buf, &out.value, &out.density).unwrap();
    let text = String::from_utf8(buf).unwrap();
    assert_eq!(text.lines().next(), Some("t,x,v,density"));
    assert_eq!(text.lines().count(), 1 + 21 * 60);
}
