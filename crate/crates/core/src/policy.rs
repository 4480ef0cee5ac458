//! Affine feedback policies and their exact Gaussian-moment cost.
//!
//! Under `α(t, x) = s_t x + i_t` the state of an LQ model stays Gaussian, so
//! the mean, the variance and the running cost satisfy closed ODEs. They are
//! integrated together with RK4 on the model grid.

use crate::error::ModelError;
use crate::interp::midpoint_cubic;
use crate::lqmodel::{CoefSample, LQModel, MeanFlow, TimeGrid};

/// `α(t, x) = slope(t) · x + intercept(t)`, sampled at the grid nodes.
#[derive(Debug, Clone, PartialEq)]
pub struct FeedbackPolicy {
    grid: TimeGrid,
    pub slope: Vec<f64>,
    pub intercept: Vec<f64>,
}

impl FeedbackPolicy {
    pub fn new(grid: TimeGrid, slope: Vec<f64>, intercept: Vec<f64>) -> Result<Self, ModelError> {
        for (name, v) in [("slope", &slope), ("intercept", &intercept)] {
            if v.len() != grid.n_nodes() {
                return Err(ModelError::SampleCount {
                    name,
                    got: v.len(),
                    expected: grid.n_nodes(),
                });
            }
            if let Some(node) = v.iter().position(|x| !x.is_finite()) {
                return Err(ModelError::NonFinite { name, node });
            }
        }
        Ok(Self {
            grid,
            slope,
            intercept,
        })
    }

    pub fn zero(grid: TimeGrid) -> Self {
        Self {
            grid,
            slope: vec![0.0; grid.n_nodes()],
            intercept: vec![0.0; grid.n_nodes()],
        }
    }

    /// The Hamiltonian minimizer `α = −(b/n)(η x + χ)`.
    pub fn from_decoupling(model: &LQModel, eta: &[f64], chi: &[f64]) -> Result<Self, ModelError> {
        let ratio: Vec<f64> = model.b.iter().zip(&model.n).map(|(b, n)| b / n).collect();
        let slope = ratio.iter().zip(eta).map(|(r, e)| -r * e).collect();
        let intercept = ratio.iter().zip(chi).map(|(r, c)| -r * c).collect();
        Self::new(*model.grid(), slope, intercept)
    }

    pub fn grid(&self) -> &TimeGrid {
        &self.grid
    }

    /// Control at node `k`.
    pub fn at_node(&self, k: usize, x: f64) -> f64 {
        self.slope[k] * x + self.intercept[k]
    }

    pub fn slope_mid(&self, k: usize) -> f64 {
        midpoint_cubic(&self.slope, k)
    }

    pub fn intercept_mid(&self, k: usize) -> f64 {
        midpoint_cubic(&self.intercept, k)
    }

    /// Adds `(δs(t), δi(t))` node-wise.
    pub fn perturbed(&self, ds: impl Fn(f64) -> f64, di: impl Fn(f64) -> f64) -> Self {
        let pts = self.grid.points();
        Self {
            grid: self.grid,
            slope: self.slope.iter().zip(&pts).map(|(s, &t)| s + ds(t)).collect(),
            intercept: self
                .intercept
                .iter()
                .zip(&pts)
                .map(|(i, &t)| i + di(t))
                .collect(),
        }
    }
}

/// How the measure argument of the coefficients is resolved.
#[derive(Debug, Clone, Copy)]
pub enum MeanCoupling<'a> {
    /// MFG individual problem: the mean is an exogenous flow.
    Frozen(&'a MeanFlow),
    /// MKV dynamics: the mean is the expectation of the controlled state itself.
    SelfConsistent,
}

/// Moments and expected cost of the state under an affine policy.
#[derive(Debug, Clone, PartialEq)]
pub struct PolicyEvaluation {
    pub mean: Vec<f64>,
    pub variance: Vec<f64>,
    pub cost: f64,
}

#[derive(Clone, Copy)]
struct Stage {
    coef: CoefSample,
    slope: f64,
    intercept: f64,
    frozen_mean: Option<f64>,
}

/// d/dt of (mean, variance, accumulated running cost).
fn moment_rhs(st: &Stage, sigma: f64, y: [f64; 3]) -> [f64; 3] {
    let [mu, var, _] = y;
    let c = &st.coef;
    let mbar = st.frozen_mean.unwrap_or(mu);
    let (s, i) = (st.slope, st.intercept);
    let second = var + mu * mu;
    let dmu = c.a * mu + c.abar * mbar + c.b * (s * mu + i) + c.beta;
    let dvar = 2.0 * (c.a + c.b * s) * var + sigma * sigma;
    let control = s * s * second + 2.0 * s * i * mu + i * i;
    let state = c.m * c.m * second + 2.0 * c.m * c.mbar * mu * mbar + c.mbar * c.mbar * mbar * mbar;
    [dmu, dvar, 0.5 * c.n * control + 0.5 * state]
}

/// Propagates mean and variance and accumulates the expected cost
/// `E ∫ ½[n α² + (m x + m̄ μ̄)²] dt + ½ E (q x_T + q̄ μ̄_T)²`.
pub fn evaluate_policy(
    model: &LQModel,
    policy: &FeedbackPolicy,
    coupling: MeanCoupling<'_>,
) -> Result<PolicyEvaluation, ModelError> {
    let grid = *model.grid();
    if policy.grid() != &grid {
        return Err(ModelError::GridMismatch("policy grid differs from model grid".into()));
    }
    if let MeanCoupling::Frozen(flow) = coupling {
        if flow.grid() != &grid {
            return Err(ModelError::GridMismatch("mean flow grid differs from model grid".into()));
        }
    }
    let n = grid.n_steps();
    let dt = grid.dt();
    let sigma = model.sigma;
    let frozen_node = |k: usize| match coupling {
        MeanCoupling::Frozen(f) => Some(f.values()[k]),
        MeanCoupling::SelfConsistent => None,
    };
    let frozen_mid = |k: usize| match coupling {
        MeanCoupling::Frozen(f) => Some(f.midpoint(k)),
        MeanCoupling::SelfConsistent => None,
    };
    let mut mean = vec![0.0; n + 1];
    let mut variance = vec![0.0; n + 1];
    let mut y = [model.x0, 0.0, 0.0];
    mean[0] = model.x0;
    for k in 0..n {
        let left = Stage {
            coef: model.sample_node(k),
            slope: policy.slope[k],
            intercept: policy.intercept[k],
            frozen_mean: frozen_node(k),
        };
        let mid = Stage {
            coef: model.sample_mid(k),
            slope: policy.slope_mid(k),
            intercept: policy.intercept_mid(k),
            frozen_mean: frozen_mid(k),
        };
        let right = Stage {
            coef: model.sample_node(k + 1),
            slope: policy.slope[k + 1],
            intercept: policy.intercept[k + 1],
            frozen_mean: frozen_node(k + 1),
        };
        let axpy = |y: [f64; 3], h: f64, d: [f64; 3]| [y[0] + h * d[0], y[1] + h * d[1], y[2] + h * d[2]];
        let k1 = moment_rhs(&left, sigma, y);
        let k2 = moment_rhs(&mid, sigma, axpy(y, 0.5 * dt, k1));
        let k3 = moment_rhs(&mid, sigma, axpy(y, 0.5 * dt, k2));
        let k4 = moment_rhs(&right, sigma, axpy(y, dt, k3));
        for j in 0..3 {
            y[j] += dt / 6.0 * (k1[j] + 2.0 * k2[j] + 2.0 * k3[j] + k4[j]);
        }
        mean[k + 1] = y[0];
        variance[k + 1] = y[1].max(0.0);
    }
    let mu_t = mean[n];
    let mbar_t = frozen_node(n).unwrap_or(mu_t);
    let (q, qbar) = (model.q, model.qbar);
    let terminal = 0.5
        * (q * q * (variance[n] + mu_t * mu_t) + 2.0 * q * qbar * mu_t * mbar_t + qbar * qbar * mbar_t * mbar_t);
    Ok(PolicyEvaluation {
        mean,
        variance,
        cost: y[2] + terminal,
    })
}
