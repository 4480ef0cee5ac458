//! Linear-quadratic control of McKean–Vlasov dynamics.
//!
//! Taking expectations in the adjoint system gives a closed deterministic
//! forward-backward system for `(x̄, ȳ)`. Once it is solved, the MKV adjoint
//! FBSDE is an ordinary linear FBSDE with known inhomogeneities.

use serde::Serialize;

use crate::error::SolveError;
use crate::lqmodel::{reduce_mkv, HalfSampled, LQModel, MeanFlow, ReducedCoefficients};
use crate::mfg_lq::{solve_mfg, MFGSolution, MfgOptions};
use crate::policy::{evaluate_policy, FeedbackPolicy, MeanCoupling};
use crate::riccati::{decouple, forward_moments, MomentPaths};

#[derive(Debug, Clone, PartialEq)]
pub struct MeanSystem {
    pub xbar: MeanFlow,
    pub ybar: MeanFlow,
    pub eta_bar: Vec<f64>,
    pub chi_bar: Vec<f64>,
}

fn mean_system_coefficients(model: &LQModel) -> ReducedCoefficients {
    let q_tot = model.q + model.qbar;
    ReducedCoefficients {
        grid: *model.grid(),
        a: model.half_sampled(|s| s.a + s.abar),
        b: model.half_sampled(|s| -s.gain()),
        c: model.half_sampled(|s| s.beta),
        m: model.half_sampled(|s| -(s.m + s.mbar) * (s.m + s.mbar)),
        d: HalfSampled::constant(model.grid(), 0.0),
        q: q_tot * q_tot,
        r: 0.0,
        sigma: 0.0,
    }
}

/// Solves the averaged system; its Riccati data has the controllable sign
/// pattern, so a blow-up here only signals a numerical failure.
pub fn solve_mean_system(model: &LQModel) -> Result<MeanSystem, SolveError> {
    let grid = *model.grid();
    let rc = mean_system_coefficients(model);
    let ric = decouple(&rc)?;
    let mom = forward_moments(&rc, &ric, 0.0, model.x0)?;
    let ybar = mom
        .mean
        .iter()
        .zip(ric.eta.iter().zip(&ric.chi))
        .map(|(x, (h, c))| h * x + c)
        .collect();
    Ok(MeanSystem {
        xbar: MeanFlow::new(grid, mom.mean)?,
        ybar: MeanFlow::new(grid, ybar)?,
        eta_bar: ric.eta,
        chi_bar: ric.chi,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct MKVSolution {
    pub xbar: MeanFlow,
    pub ybar: MeanFlow,
    pub eta: Vec<f64>,
    pub chi: Vec<f64>,
    pub eta_bar: Vec<f64>,
    pub chi_bar: Vec<f64>,
    pub z_scale: Vec<f64>,
    pub feedback: FeedbackPolicy,
    pub moments: MomentPaths,
}

impl MKVSolution {
    /// `sup_t |E x_t − x̄_t|` between the decoupled state and the mean system.
    pub fn consistency_residual(&self) -> f64 {
        self.moments
            .mean
            .iter()
            .zip(self.xbar.values())
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max)
    }
}

pub fn solve_mkv(model: &LQModel) -> Result<MKVSolution, SolveError> {
    let ms = solve_mean_system(model)?;
    let rc = reduce_mkv(model, &ms.xbar, &ms.ybar)?;
    let ric = decouple(&rc)?;
    let moments = forward_moments(&rc, &ric, model.sigma, model.x0)?;
    let feedback = FeedbackPolicy::from_decoupling(model, &ric.eta, &ric.chi)?;
    Ok(MKVSolution {
        xbar: ms.xbar,
        ybar: ms.ybar,
        eta: ric.eta,
        chi: ric.chi,
        eta_bar: ms.eta_bar,
        chi_bar: ms.chi_bar,
        z_scale: ric.z_scale,
        feedback,
        moments,
    })
}

/// Expected MKV objective under the optimal feedback.
pub fn mkv_cost(model: &LQModel, sol: &MKVSolution) -> Result<f64, SolveError> {
    social_cost(model, &sol.feedback)
}

/// MKV objective of any affine feedback, with the mean generated by the policy.
pub fn social_cost(model: &LQModel, policy: &FeedbackPolicy) -> Result<f64, SolveError> {
    Ok(evaluate_policy(model, policy, MeanCoupling::SelfConsistent)?.cost)
}

/// Side-by-side summary of the two solution concepts on one model.
#[allow(non_snake_case)]
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ComparisonReport {
    pub mfg_mean_T: f64,
    pub mkv_mean_T: f64,
    pub sup_mean_gap: f64,
    pub mfg_cost: f64,
    pub mfg_cost_under_mkv_objective: f64,
    pub mkv_cost: f64,
}

pub fn compare(model: &LQModel, opts: MfgOptions) -> Result<(MFGSolution, MKVSolution, ComparisonReport), SolveError> {
    let mfg = solve_mfg(model, opts)?;
    let mkv = solve_mkv(model)?;
    let report = ComparisonReport {
        mfg_mean_T: mfg.mean_flow.terminal(),
        mkv_mean_T: mkv.xbar.terminal(),
        sup_mean_gap: mfg.mean_flow.sup_distance(&mkv.xbar),
        mfg_cost: crate::mfg_lq::mfg_cost(model, &mfg)?,
        mfg_cost_under_mkv_objective: social_cost(model, &mfg.feedback)?,
        mkv_cost: mkv_cost(model, &mkv)?,
    };
    Ok((mfg, mkv, report))
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
        for (q, qbar) in [(1.0, 1.0), (1.0, 0.0), (2.0, -0.5), (1.0, -3.0)] {
            let sol = solve_mkv(&simple(q, qbar, 0.4)).unwrap();
            let expect = 1.0 / (1.0 + (q + qbar) * (q + qbar));
            assert!((sol.xbar.terminal() - expect).abs() < 1e-10);
            assert!(sol.consistency_residual() < 1e-9);
        }
    }

    #[test]
    fn no_mean_interaction_agrees_with_mfg() {
        let model = simple(1.3, 0.0, 0.7);
        let (mfg, mkv, rep) = compare(&model, MfgOptions::default()).unwrap();
        assert!(rep.sup_mean_gap < 1e-10);
        for (a, b) in mfg.eta.iter().zip(&mkv.eta) {
            assert!((a - b).abs() < 1e-10);
        }
        assert!((rep.mkv_cost - rep.mfg_cost).abs() < 1e-10);
    }

    #[test]
    fn mkv_beats_mfg_on_its_own_objective() {
        let (_, _, rep) = compare(&simple(1.0, 1.0, 0.5), MfgOptions::default()).unwrap();
        assert!((rep.mfg_mean_T - 1.0 / 3.0).abs() < 1e-10);
        assert!((rep.mkv_mean_T - 0.2).abs() < 1e-10);
        assert!(rep.mkv_cost < rep.mfg_cost_under_mkv_objective);
    }
}
