//! Decoupling of the canonical linear FBSDE by the affine ansatz
//! `y_t = η_t x_t + χ_t`.
//!
//! `η` solves the Riccati equation `η̇ = −𝔟η² − 2𝔞η + 𝔪`, `η_T = 𝔮`, integrated
//! backward with fixed-step RK4. `χ` solves `χ̇ + (𝔞 + 𝔟η)χ = 𝔡 − 𝔠η`,
//! `χ_T = 𝔯`; it is computed from the variation-of-constants formula and
//! checked against a backward RK4 integration of the same ODE.
//!
//! Between nodes `η` and `χ` are represented by cubic Hermite interpolants
//! built from the node values and the ODE right-hand sides, which keeps all
//! quadratures fourth order.

use crate::error::SolveError;
use crate::interp::{gauss5, gauss5_points, hermite};
use crate::lqmodel::{ReducedCoefficients, TimeGrid};

/// |η| above this is treated as blow-up.
pub const BLOW_UP_THRESHOLD: f64 = 1e10;

/// Required agreement between the two χ routes (relative to max(1, sup|χ|)).
pub const OFFSET_CROSS_CHECK: f64 = 1e-8;

/// Relative step-doubling discrepancy that makes a full RK4 step suspect.
const STEP_TOLERANCE: f64 = 1e-7;
/// Discrepancy on a refined substep that is diagnosed as a singularity.
const SINGULAR_TOLERANCE: f64 = 1e-3;
const REFINEMENT: usize = 16;

#[derive(Debug, Clone, PartialEq)]
pub struct RiccatiSolution {
    pub grid: TimeGrid,
    pub eta: Vec<f64>,
    /// Empty when the Riccati equation blew up.
    pub chi: Vec<f64>,
    pub blow_up: Option<f64>,
    /// `z_t = σ η_t`.
    pub z_scale: Vec<f64>,
}

impl RiccatiSolution {
    pub fn ensure_finite(&self) -> Result<&Self, SolveError> {
        match self.blow_up {
            Some(time) => Err(SolveError::BlowUp { time }),
            None => Ok(self),
        }
    }
}

/// Mean and variance of the Gaussian state under the decoupled dynamics.
#[derive(Debug, Clone, PartialEq)]
pub struct MomentPaths {
    pub mean: Vec<f64>,
    pub variance: Vec<f64>,
}

fn riccati_rhs(rc: &ReducedCoefficients, k: usize, theta: f64, eta: f64) -> f64 {
    let a = rc.a.eval_in(k, theta);
    let b = rc.b.eval_in(k, theta);
    let m = rc.m.eval_in(k, theta);
    -b * eta * eta - 2.0 * a * eta + m
}

/// One RK4 step inside interval `k` from local coordinate `from` to `to`.
fn rk4_local(rc: &ReducedCoefficients, k: usize, from: f64, to: f64, eta: f64) -> f64 {
    let h = (to - from) * rc.grid.dt();
    let mid = 0.5 * (from + to);
    let k1 = riccati_rhs(rc, k, from, eta);
    let k2 = riccati_rhs(rc, k, mid, eta + 0.5 * h * k1);
    let k3 = riccati_rhs(rc, k, mid, eta + 0.5 * h * k2);
    let k4 = riccati_rhs(rc, k, to, eta + h * k3);
    eta + h / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
}

/// Full step plus a relative step-doubling error estimate.
fn checked_step(rc: &ReducedCoefficients, k: usize, from: f64, to: f64, eta: f64) -> (f64, f64) {
    let full = rk4_local(rc, k, from, to, eta);
    let mid = 0.5 * (from + to);
    let half = rk4_local(rc, k, mid, to, rk4_local(rc, k, from, mid, eta));
    let err = (full - half).abs() / half.abs().max(1.0);
    (full, if err.is_finite() { err } else { f64::INFINITY })
}

fn is_blown(v: f64) -> bool {
    !v.is_finite() || v.abs() > BLOW_UP_THRESHOLD
}

/// Integrates the Riccati equation backward from `η_T = 𝔮`. The offset is
/// left empty; see [`decouple`].
///
/// A blow-up is located to within `dt/16` and reported in `blow_up`; the
/// entries at and before that time are NaN.
pub fn solve_riccati(rc: &ReducedCoefficients) -> RiccatiSolution {
    let grid = rc.grid;
    let n = grid.n_steps();
    let mut eta = vec![f64::NAN; n + 1];
    eta[n] = rc.q;
    let mut blow_up = None;

    'outer: for k in (0..n).rev() {
        let current = eta[k + 1];
        let (full, err) = checked_step(rc, k, 1.0, 0.0, current);
        if err <= STEP_TOLERANCE && !is_blown(full) {
            eta[k] = full;
            continue;
        }
        // Suspect step: refine to dt/16 and look for the singularity.
        let mut value = current;
        for j in (0..REFINEMENT).rev() {
            let from = (j + 1) as f64 / REFINEMENT as f64;
            let to = j as f64 / REFINEMENT as f64;
            let (next, err) = checked_step(rc, k, from, to, value);
            if err > SINGULAR_TOLERANCE || is_blown(next) {
                blow_up = Some(grid.t(k) + to * grid.dt());
                break 'outer;
            }
            value = next;
        }
        eta[k] = value;
    }

    let z_scale = eta.iter().map(|e| rc.sigma * e).collect();
    RiccatiSolution {
        grid,
        eta,
        chi: Vec::new(),
        blow_up,
        z_scale,
    }
}

/// Full decoupling: `η` by [`solve_riccati`], then the cross-checked `χ`.
pub fn decouple(rc: &ReducedCoefficients) -> Result<RiccatiSolution, SolveError> {
    let mut sol = solve_riccati(rc);
    sol.ensure_finite()?;
    sol.chi = solve_chi(rc, &sol.eta)?;
    Ok(sol)
}

/// Hermite representation of `η` (and optionally `χ`) on one interval.
struct Interval<'a> {
    rc: &'a ReducedCoefficients,
    k: usize,
    dt: f64,
    eta: (f64, f64),
    eta_dot: (f64, f64),
}

impl<'a> Interval<'a> {
    fn new(rc: &'a ReducedCoefficients, eta: &[f64], k: usize) -> Self {
        Self {
            rc,
            k,
            dt: rc.grid.dt(),
            eta: (eta[k], eta[k + 1]),
            eta_dot: (
                riccati_rhs(rc, k, 0.0, eta[k]),
                riccati_rhs(rc, k, 1.0, eta[k + 1]),
            ),
        }
    }

    fn theta(&self, s: f64) -> f64 {
        s / self.dt
    }

    fn eta_at(&self, theta: f64) -> f64 {
        hermite(self.eta.0, self.eta_dot.0, self.eta.1, self.eta_dot.1, self.dt, theta)
    }

    /// 𝔞 + 𝔟η.
    fn kappa(&self, theta: f64) -> f64 {
        self.rc.a.eval_in(self.k, theta) + self.rc.b.eval_in(self.k, theta) * self.eta_at(theta)
    }

    /// 𝔡 − 𝔠η.
    fn source(&self, theta: f64) -> f64 {
        self.rc.d.eval_in(self.k, theta) - self.rc.c.eval_in(self.k, theta) * self.eta_at(theta)
    }

    /// ∫ κ over local time `[0, s]`.
    fn exponent(&self, s: f64) -> f64 {
        if s == 0.0 {
            return 0.0;
        }
        gauss5(0.0, s, |u| self.kappa(self.theta(u)))
    }

    fn chi_dot(&self, theta: f64, chi: f64) -> f64 {
        -self.kappa(theta) * chi + self.source(theta)
    }
}

fn check_eta(rc: &ReducedCoefficients, eta: &[f64]) -> Result<(), SolveError> {
    if eta.len() != rc.grid.n_nodes() {
        return Err(crate::error::ModelError::GridMismatch(format!(
            "eta has {} samples, grid has {} nodes",
            eta.len(),
            rc.grid.n_nodes()
        ))
        .into());
    }
    if let Some(k) = eta.iter().position(|v| !v.is_finite()) {
        return Err(SolveError::BlowUp {
            time: rc.grid.t(k),
        });
    }
    Ok(())
}

/// χ from the variation-of-constants formula
/// `χ_t = 𝔯 e^{∫_t^T κ} − ∫_t^T (𝔡_s − 𝔠_s η_s) e^{∫_t^s κ} ds`, `κ = 𝔞 + 𝔟η`.
fn chi_quadrature(rc: &ReducedCoefficients, eta: &[f64]) -> Vec<f64> {
    let n = rc.grid.n_steps();
    let mut chi = vec![0.0; n + 1];
    chi[n] = rc.r;
    for k in (0..n).rev() {
        let iv = Interval::new(rc, eta, k);
        let growth = iv.exponent(iv.dt).exp();
        let forcing: f64 = gauss5_points(0.0, iv.dt)
            .iter()
            .map(|&(s, w)| w * iv.source(iv.theta(s)) * iv.exponent(s).exp())
            .sum();
        chi[k] = growth * chi[k + 1] - forcing;
    }
    chi
}

/// χ from backward RK4 on `χ̇ = −(𝔞 + 𝔟η)χ + 𝔡 − 𝔠η`.
fn chi_ode(rc: &ReducedCoefficients, eta: &[f64]) -> Vec<f64> {
    let n = rc.grid.n_steps();
    let h = -rc.grid.dt();
    let mut chi = vec![0.0; n + 1];
    chi[n] = rc.r;
    for k in (0..n).rev() {
        let iv = Interval::new(rc, eta, k);
        let x = chi[k + 1];
        let k1 = iv.chi_dot(1.0, x);
        let k2 = iv.chi_dot(0.5, x + 0.5 * h * k1);
        let k3 = iv.chi_dot(0.5, x + 0.5 * h * k2);
        let k4 = iv.chi_dot(0.0, x + h * k3);
        chi[k] = x + h / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
    }
    chi
}

/// Relative sup-norm gap between the quadrature and ODE routes for χ.
pub fn chi_cross_check(rc: &ReducedCoefficients, eta: &[f64]) -> Result<f64, SolveError> {
    check_eta(rc, eta)?;
    Ok(relative_gap(&chi_quadrature(rc, eta), &chi_ode(rc, eta)))
}

fn relative_gap(a: &[f64], b: &[f64]) -> f64 {
    let scale = a.iter().fold(1.0_f64, |acc, v| acc.max(v.abs()));
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y).abs())
        .fold(0.0, f64::max)
        / scale
}

/// Solves for the offset `χ`; both routes must agree to [`OFFSET_CROSS_CHECK`].
pub fn solve_chi(rc: &ReducedCoefficients, eta: &[f64]) -> Result<Vec<f64>, SolveError> {
    check_eta(rc, eta)?;
    let quad = chi_quadrature(rc, eta);
    let ode = chi_ode(rc, eta);
    let gap = relative_gap(&quad, &ode);
    if gap > OFFSET_CROSS_CHECK {
        return Err(SolveError::OffsetMismatch { gap });
    }
    Ok(quad)
}

/// Mean and variance of
/// `dx = [(𝔞 + 𝔟η)x + 𝔟χ + 𝔠] dt + σ dW`, `x_0 = x0`.
pub fn forward_moments(
    rc: &ReducedCoefficients,
    ric: &RiccatiSolution,
    sigma: f64,
    x0: f64,
) -> Result<MomentPaths, SolveError> {
    ric.ensure_finite()?;
    check_eta(rc, &ric.eta)?;
    if ric.chi.len() != rc.grid.n_nodes() {
        return Err(SolveError::BlowUp {
            time: rc.grid.horizon(),
        });
    }
    let n = rc.grid.n_steps();
    let mut mean = vec![0.0; n + 1];
    let mut variance = vec![0.0; n + 1];
    mean[0] = x0;
    let s2 = sigma * sigma;
    for k in 0..n {
        let iv = Interval::new(rc, &ric.eta, k);
        let chi = (ric.chi[k], ric.chi[k + 1]);
        let chi_dot = (iv.chi_dot(0.0, chi.0), iv.chi_dot(1.0, chi.1));
        let chi_at = |theta: f64| hermite(chi.0, chi_dot.0, chi.1, chi_dot.1, iv.dt, theta);
        let total = iv.exponent(iv.dt);
        let mut drift_part = 0.0;
        let mut noise_part = 0.0;
        for (s, w) in gauss5_points(0.0, iv.dt) {
            let theta = iv.theta(s);
            let decay = total - iv.exponent(s);
            let forcing = rc.b.eval_in(k, theta) * chi_at(theta) + rc.c.eval_in(k, theta);
            drift_part += w * forcing * decay.exp();
            noise_part += w * (2.0 * decay).exp();
        }
        mean[k + 1] = total.exp() * mean[k] + drift_part;
        variance[k + 1] = ((2.0 * total).exp() * variance[k] + s2 * noise_part).max(0.0);
    }
    Ok(MomentPaths { mean, variance })
}
