//! Emissions regulation game with a cap-and-penalty terminal cost.
//!
//! Each firm controls perceived emissions `dx = −α dt + σ dW` with running
//! cost `α²/2` and pays `λ (x_T − Λ)⁺` at maturity when the average ends above
//! the cap. Off the cap the HJB equation `∂ₜv + ½σ²∂ₓₓv − ½(∂ₓv)² = 0` is
//! linearized by `u = exp(−v/σ²)`, which gives, with `τ = T − t`,
//! `s = σ√τ`, `d = x − Λ` and `k = λ/σ²`,
//!
//! `v = −σ² ln[ Φ(−d/s) + exp(k(λτ/2 − d)) Φ((d − λτ)/s) ]`
//!
//! and `∂ₓv = λ · (second term) / (sum)`.

use rand::Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::ModelError;
use crate::normal::{cdf, ln_cdf};
use crate::rng::stream;

/// Euler–Maruyama steps over `[0, T]` in [`simulate_emissions`].
pub const EULER_STEPS: usize = 400;
/// Width of the band around the cap inside which the mean is declared singular.
pub const SINGULAR_BAND: f64 = 1e-6;
pub const MIN_PATHS: usize = 1000;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EmissionsModel {
    pub lambda: f64,
    pub cap: f64,
    pub sigma: f64,
    #[serde(rename = "T")]
    pub horizon: f64,
    pub x0: f64,
}

impl EmissionsModel {
    pub fn new(lambda: f64, cap: f64, sigma: f64, horizon: f64, x0: f64) -> Result<Self, ModelError> {
        let m = Self {
            lambda,
            cap,
            sigma,
            horizon,
            x0,
        };
        m.validate()?;
        Ok(m)
    }

    pub fn validate(&self) -> Result<(), ModelError> {
        for (name, v) in [("lambda", self.lambda), ("sigma", self.sigma)] {
            if !(v.is_finite() && v > 0.0) {
                return Err(ModelError::Parameter(format!("{name} must be positive, got {v}")));
            }
        }
        if !(self.horizon.is_finite() && self.horizon > 0.0) {
            return Err(ModelError::Horizon(self.horizon));
        }
        for (name, v) in [("cap", self.cap), ("x0", self.x0)] {
            if !v.is_finite() {
                return Err(ModelError::Parameter(format!("{name} must be finite")));
            }
        }
        Ok(())
    }

    /// `δ = x0 − Λ − λT/2`.
    pub fn delta(&self) -> f64 {
        self.x0 - self.cap - 0.5 * self.lambda * self.horizon
    }

    fn check_time(&self, t: f64) -> Result<(), ModelError> {
        if (0.0..=self.horizon).contains(&t) {
            Ok(())
        } else {
            Err(ModelError::Parameter(format!("time {t} outside [0, {}]", self.horizon)))
        }
    }

    /// Logarithms of the two Gaussian terms; `None` at maturity.
    fn log_terms(&self, t: f64, x: f64) -> Option<(f64, f64)> {
        let tau = self.horizon - t;
        if tau <= 0.0 {
            return None;
        }
        let s = self.sigma * tau.sqrt();
        let d = x - self.cap;
        let k = self.lambda / (self.sigma * self.sigma);
        let l1 = ln_cdf(-d / s);
        let l2 = k * (0.5 * self.lambda * tau - d) + ln_cdf((d - self.lambda * tau) / s);
        Some((l1, l2))
    }

    fn value_unchecked(&self, t: f64, x: f64) -> f64 {
        match self.log_terms(t, x) {
            None => self.lambda * (x - self.cap).max(0.0),
            Some((l1, l2)) => {
                let (hi, lo) = if l1 >= l2 { (l1, l2) } else { (l2, l1) };
                let lse = hi + (lo - hi).exp().ln_1p();
                -self.sigma * self.sigma * lse
            }
        }
    }

    /// Weight of the above-cap term; equals `P{x_T > Λ | x_t = x}` under the
    /// optimal dynamics.
    fn exceed_ratio(&self, t: f64, x: f64) -> f64 {
        match self.log_terms(t, x) {
            None => {
                if x > self.cap {
                    1.0
                } else {
                    0.0
                }
            }
            // l2 − LSE(l1, l2) = −ln(1 + exp(l1 − l2)).
            Some((l1, l2)) => {
                let z = l1 - l2;
                if z > 0.0 {
                    let e = (-z).exp();
                    e / (1.0 + e)
                } else {
                    1.0 / (1.0 + z.exp())
                }
            }
        }
    }

    fn feedback_unchecked(&self, t: f64, x: f64) -> f64 {
        self.lambda * self.exceed_ratio(t, x)
    }
}

/// Closed-form value function; at `t = T` the terminal penalty.
pub fn value_function(model: &EmissionsModel, t: f64, x: f64) -> Result<f64, ModelError> {
    model.check_time(t)?;
    Ok(model.value_unchecked(t, x))
}

/// Optimal abatement rate `∂ₓv(t, x) ∈ [0, λ]`.
pub fn optimal_feedback(model: &EmissionsModel, t: f64, x: f64) -> Result<f64, ModelError> {
    model.check_time(t)?;
    Ok(model.feedback_unchecked(t, x))
}

/// `P{x_T > Λ}` under the abatement feedback, started from `x0`.
pub fn prob_exceed_cap(model: &EmissionsModel) -> f64 {
    model.exceed_ratio(0.0, model.x0)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Regime {
    #[serde(rename = "BAU")]
    Bau,
    Abatement,
    Critical,
}

#[allow(non_snake_case)]
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RegimeReport {
    pub regime: Regime,
    pub prob_exceed: f64,
    pub mean_T: f64,
    pub fixed_point_ok: bool,
    pub delta: f64,
    /// The candidate terminal mean sits on the cap, where the equilibrium is
    /// singular and left undefined.
    pub singular: bool,
}

pub fn classify_regime(model: &EmissionsModel) -> RegimeReport {
    let delta = model.delta();
    let (lambda, horizon, cap, x0) = (model.lambda, model.horizon, model.cap, model.x0);
    if x0 <= cap {
        let prob = cdf((x0 - cap) / (model.sigma * horizon.sqrt()));
        let singular = (x0 - cap).abs() < SINGULAR_BAND;
        return RegimeReport {
            regime: if singular { Regime::Critical } else { Regime::Bau },
            prob_exceed: prob,
            mean_T: x0,
            fixed_point_ok: !singular,
            delta,
            singular,
        };
    }
    let prob = prob_exceed_cap(model);
    let mean_t = x0 - lambda * horizon * prob;
    let singular = (mean_t - cap).abs() < SINGULAR_BAND;
    let regime = if !singular && x0 > cap + lambda * horizon {
        Regime::Abatement
    } else {
        Regime::Critical
    };
    RegimeReport {
        regime,
        prob_exceed: prob,
        mean_T: mean_t,
        fixed_point_ok: !singular && mean_t > cap,
        delta,
        singular,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum EmissionsPolicy {
    Optimal,
    Zero,
}

#[allow(non_snake_case)]
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EmissionsSimulation {
    pub n_paths: usize,
    pub prob_exceed: f64,
    pub prob_exceed_se: f64,
    pub mean_T: f64,
    pub mean_T_se: f64,
}

/// Euler–Maruyama estimate of `P{x_T > Λ}` and `E x_T`.
pub fn simulate_emissions(
    model: &EmissionsModel,
    policy: EmissionsPolicy,
    n_paths: usize,
    seed: u64,
) -> Result<EmissionsSimulation, ModelError> {
    model.validate()?;
    if n_paths < MIN_PATHS {
        return Err(ModelError::Parameter(format!(
            "at least {MIN_PATHS} paths required, got {n_paths}"
        )));
    }
    let dt = model.horizon / EULER_STEPS as f64;
    let sdt = model.sigma * dt.sqrt();
    let terminal: Vec<f64> = (0..n_paths as u64)
        .into_par_iter()
        .map(|path| {
            let mut rng = stream(seed, 0, path);
            let mut x = model.x0;
            for k in 0..EULER_STEPS {
                let drift = match policy {
                    EmissionsPolicy::Optimal => -model.feedback_unchecked(k as f64 * dt, x),
                    EmissionsPolicy::Zero => 0.0,
                };
                let z: f64 = rng.sample(StandardNormal);
                x += drift * dt + sdt * z;
            }
            x
        })
        .collect();
    let n = n_paths as f64;
    let hits = terminal.iter().filter(|&&x| x > model.cap).count() as f64;
    let p = hits / n;
    let mean = terminal.iter().sum::<f64>() / n;
    let var = terminal.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / (n - 1.0);
    Ok(EmissionsSimulation {
        n_paths,
        prob_exceed: p,
        prob_exceed_se: (p * (1.0 - p) / n).sqrt(),
        mean_T: mean,
        mean_T_se: (var / n).sqrt(),
    })
}
