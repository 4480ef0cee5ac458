//! Linear-quadratic mean field game.
//!
//! The fixed point of the mean flow is obtained directly: the pair
//! `(μ̄, ȳ) = (E x, E y)` of any equilibrium solves a deterministic
//! forward-backward system, which after the change of variable
//! `ζ = e ȳ`, `e_t = exp(−∫₀ᵗ ā)` has the canonical form and is decoupled by a
//! Riccati ansatz. The individual FBSDE is then solved with the mean frozen.

use crate::error::SolveError;
use crate::lqmodel::{reduce_mfg, HalfSampled, LQModel, MeanFlow, ReducedCoefficients};
use crate::policy::{evaluate_policy, FeedbackPolicy, MeanCoupling};
use crate::riccati::{decouple, forward_moments, MomentPaths};

/// Sup-norm tolerance on the fixed-point residual `|E x_t − μ̄_t|`.
pub const TOL_FP: f64 = 1e-6;

#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct MfgOptions {
    /// Attempt the solve when the existence hypotheses fail; a Riccati
    /// blow-up is then reported as nonexistence.
    pub allow_short_horizon: bool,
}

impl MfgOptions {
    pub fn short_horizon() -> Self {
        Self {
            allow_short_horizon: true,
        }
    }
}

/// `q(q + q̄) ≥ 0` and `m_t(m_t + m̄_t) ≥ 0` at every node.
pub fn existence_hypotheses_hold(model: &LQModel) -> bool {
    model.q * (model.q + model.qbar) >= 0.0
        && model
            .m
            .iter()
            .zip(&model.mbar)
            .all(|(m, mb)| m * (m + mb) >= 0.0)
}

/// The mean flow fixed point with the decoupling of the averaged system
/// `ȳ_t = η̄_t μ̄_t + χ̄_t`.
#[derive(Debug, Clone, PartialEq)]
pub struct MeanFixedPoint {
    pub mean_flow: MeanFlow,
    pub ybar: MeanFlow,
    pub eta_bar: Vec<f64>,
    pub chi_bar: Vec<f64>,
}

/// `e_t = exp(−∫₀ᵗ ā)` on nodes and midpoints; exact for piecewise-linear ā.
fn discount(model: &LQModel) -> HalfSampled {
    let grid = model.grid();
    let n = grid.n_steps();
    let dt = grid.dt();
    let mut nodes = vec![1.0; n + 1];
    let mut mids = vec![1.0; n];
    let mut integral = 0.0;
    for k in 0..n {
        let (l, r) = (model.abar[k], model.abar[k + 1]);
        let mid = 0.5 * (l + r);
        mids[k] = (-(integral + 0.25 * dt * (l + mid))).exp();
        integral += 0.5 * dt * (l + r);
        nodes[k + 1] = (-integral).exp();
    }
    HalfSampled::from_nodes_and_mids(&nodes, &mids)
}

/// Canonical coefficients of the transformed averaged system.
fn averaged_system(model: &LQModel, e: &HalfSampled) -> ReducedCoefficients {
    let e_t = e.node(model.grid().n_steps());
    ReducedCoefficients {
        grid: *model.grid(),
        a: model.half_sampled(|s| s.a + s.abar),
        b: model.half_sampled(|s| -s.gain()).zip_with(e, |g, e| g / e),
        c: model.half_sampled(|s| s.beta),
        m: model.half_sampled(|s| -s.m * (s.m + s.mbar)).zip_with(e, |m, e| m * e),
        d: HalfSampled::constant(model.grid(), 0.0),
        q: e_t * model.q * (model.q + model.qbar),
        r: 0.0,
        sigma: 0.0,
    }
}

/// Solves the averaged forward-backward system for the equilibrium mean flow.
pub fn solve_mean_fixed_point(
    model: &LQModel,
    opts: MfgOptions,
) -> Result<MeanFixedPoint, SolveError> {
    if !opts.allow_short_horizon && !existence_hypotheses_hold(model) {
        return Err(SolveError::HypothesesViolated);
    }
    let grid = *model.grid();
    let e = discount(model);
    let rc = averaged_system(model, &e);
    let ric = decouple(&rc).map_err(|err| match err {
        SolveError::BlowUp { time } => SolveError::NoFixedPoint { time },
        other => other,
    })?;
    let mom = forward_moments(&rc, &ric, 0.0, model.x0)?;
    let e_nodes = e.nodes();
    let eta_bar: Vec<f64> = ric.eta.iter().zip(&e_nodes).map(|(h, e)| h / e).collect();
    let chi_bar: Vec<f64> = ric.chi.iter().zip(&e_nodes).map(|(c, e)| c / e).collect();
    let ybar = mom
        .mean
        .iter()
        .zip(eta_bar.iter().zip(&chi_bar))
        .map(|(mu, (h, c))| h * mu + c)
        .collect();
    Ok(MeanFixedPoint {
        mean_flow: MeanFlow::new(grid, mom.mean)?,
        ybar: MeanFlow::new(grid, ybar)?,
        eta_bar,
        chi_bar,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct MFGSolution {
    pub mean_flow: MeanFlow,
    pub ybar: MeanFlow,
    pub eta: Vec<f64>,
    pub chi: Vec<f64>,
    pub eta_bar: Vec<f64>,
    pub chi_bar: Vec<f64>,
    /// `z_t = σ η_t`.
    pub z_scale: Vec<f64>,
    pub feedback: FeedbackPolicy,
    pub moments: MomentPaths,
}

impl MFGSolution {
    /// Change of μ̄ under one Picard update `μ̄ ← E x` (sup norm).
    pub fn fixed_point_residual(&self) -> f64 {
        self.moments
            .mean
            .iter()
            .zip(self.mean_flow.values())
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max)
    }
}

/// Individual FBSDE decoupled against a given mean flow.
pub fn solve_individual(
    model: &LQModel,
    mean_flow: &MeanFlow,
) -> Result<(ReducedCoefficients, crate::riccati::RiccatiSolution, MomentPaths), SolveError> {
    let rc = reduce_mfg(model, mean_flow)?;
    let ric = decouple(&rc)?;
    let moments = forward_moments(&rc, &ric, model.sigma, model.x0)?;
    Ok((rc, ric, moments))
}

/// Full MFG pipeline: fixed-point mean flow, then the individual FBSDE.
pub fn solve_mfg(model: &LQModel, opts: MfgOptions) -> Result<MFGSolution, SolveError> {
    let fp = solve_mean_fixed_point(model, opts)?;
    let (_, ric, moments) = solve_individual(model, &fp.mean_flow)?;
    let feedback = FeedbackPolicy::from_decoupling(model, &ric.eta, &ric.chi)?;
    Ok(MFGSolution {
        mean_flow: fp.mean_flow,
        ybar: fp.ybar,
        eta: ric.eta,
        chi: ric.chi,
        eta_bar: fp.eta_bar,
        chi_bar: fp.chi_bar,
        z_scale: ric.z_scale,
        feedback,
        moments,
    })
}

/// Expected individual cost under the equilibrium feedback with μ̄ frozen.
pub fn mfg_cost(model: &LQModel, sol: &MFGSolution) -> Result<f64, SolveError> {
    individual_cost(model, &sol.feedback, &sol.mean_flow)
}

/// Expected individual cost of an arbitrary affine policy against a frozen flow.
pub fn individual_cost(
    model: &LQModel,
    policy: &FeedbackPolicy,
    mean_flow: &MeanFlow,
) -> Result<f64, SolveError> {
    Ok(evaluate_policy(model, policy, MeanCoupling::Frozen(mean_flow))?.cost)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lqmodel::LQModelSpec;

    fn simple(q: f64, qbar: f64, sigma: f64) -> LQModel {
        LQModelSpec::simple(q, qbar, 1.0, 1.0, sigma, 400).build().unwrap()
    }

    #[test]
    fn simple_example_terminal_mean() {
        for (q, qbar) in [(1.0, 1.0), (1.0, 0.0), (2.0, 0.5), (1.0, -0.5)] {
            let sol = solve_mfg(&simple(q, qbar, 0.4), MfgOptions::default()).unwrap();
            let expect = 1.0 / (1.0 + q * (q + qbar));
            assert!((sol.mean_flow.terminal() - expect).abs() < 1e-10 * expect);
            assert!(sol.fixed_point_residual() < TOL_FP);
        }
    }

    #[test]
    fn simple_example_feedback() {
        let sol = solve_mfg(&simple(1.0, 0.0, 0.4), MfgOptions::default()).unwrap();
        for (k, t) in sol.mean_flow.grid().points().into_iter().enumerate() {
            assert!((sol.feedback.slope[k] + 1.0 / (2.0 - t)).abs() < 1e-12);
            assert!(sol.feedback.intercept[k].abs() < 1e-12);
        }
    }

    #[test]
    fn zero_costs_mean_stays_put() {
        let model = simple(0.0, 3.0, 0.4);
        let fp = solve_mean_fixed_point(&model, MfgOptions::default()).unwrap();
        assert!(fp.mean_flow.values().iter().all(|&v| (v - 1.0).abs() < 1e-14));
        assert!(fp.ybar.values().iter().all(|&v| v.abs() < 1e-14));
        let sol = solve_mfg(&model, MfgOptions::default()).unwrap();
        assert!(sol.feedback.slope.iter().all(|&v| v == 0.0));
        assert!(sol.moments.mean.iter().all(|&v| (v - 1.0).abs() < 1e-14));
        // Only the constant terminal term ½(q̄ μ̄_T)² remains.
        assert!((mfg_cost(&model, &sol).unwrap() - 4.5).abs() < 1e-12);
    }

    #[test]
    fn hypotheses_gate_without_short_horizon() {
        let model = simple(1.0, -1.5, 0.4);
        assert!(!existence_hypotheses_hold(&model));
        assert_eq!(
            solve_mfg(&model, MfgOptions::default()).unwrap_err(),
            SolveError::HypothesesViolated
        );
        // q(q + q̄) = −1/2: still solvable on T = 1.
        let sol = solve_mfg(&model, MfgOptions::short_horizon()).unwrap();
        assert!((sol.mean_flow.terminal() - 2.0).abs() < 1e-9);
    }

    #[test]
    fn degenerate_denominator_is_nonexistence() {
        let model = simple(1.0, -2.0, 0.4);
        assert!(matches!(
            solve_mfg(&model, MfgOptions::short_horizon()),
            Err(SolveError::NoFixedPoint { .. })
        ));
        let model = simple(1.0, -3.0, 0.4);
        assert!(matches!(
            solve_mfg(&model, MfgOptions::short_horizon()),
            Err(SolveError::NoFixedPoint { .. })
        ));
    }

    #[test]
    fn deterministic_cost_by_hand() {
        // σ → 0, q = 1, q̄ = 0: x_t = (2 − t)/2, α ≡ −1/2, J = 1/8 + 1/8.
        let sol_model = simple(1.0, 0.0, 1e-300);
        let sol = solve_mfg(&sol_model, MfgOptions::default()).unwrap();
        assert!((mfg_cost(&sol_model, &sol).unwrap() - 0.25).abs() < 1e-12);
    }
}
