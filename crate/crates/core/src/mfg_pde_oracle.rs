//! Finite-difference realization of the MFG fixed-point map for models whose
//! measure dependence is through the mean only.
//!
//! One application of the map freezes the mean flow, solves the HJB equation
//! backward, reads the optimal drift off `∂ₓv`, pushes the initial law forward
//! with the Kolmogorov equation and returns the new mean flow. Picard
//! iteration with damping looks for a fixed point.
//!
//! HJB: second-order IMEX predictor-corrector (Crank–Nicolson diffusion,
//! Heun for the Hamiltonian), started with implicit sub-steps to damp the
//! kink of nonsmooth terminal data. Kolmogorov: conservative finite volumes
//! with the exponentially fitted (Scharfetter–Gummel) flux and backward Euler
//! sub-steps, which keeps densities nonnegative and mass exact.

use std::io::Write;

use crate::emissions::EmissionsModel;
use crate::error::{ModelError, SolveError};
use crate::interp::solve_tridiagonal;
use crate::lqmodel::{LQModel, MeanFlow, TimeGrid};

/// Minimum number of space nodes.
pub const MIN_NX: usize = 50;
/// Half-width of the default domain in driftless standard deviations at `T`.
pub const DOMAIN_SDS: f64 = 6.0;
/// Backward Euler sub-steps per time step in the Kolmogorov solver.
const KOLMOGOROV_SUBSTEPS: usize = 8;
/// Steps near maturity replaced by implicit sub-steps.
const STARTUP_STEPS: usize = 2;
const STARTUP_SUBSTEPS: usize = 16;

/// Control-affine model with scalar (mean) interaction:
/// `dx = [c(t, x, μ̄) + b(t) α] dt + σ dW`, running cost
/// `n(t) α²/2 + f(t, x, μ̄)`, terminal cost `g(x, μ̄_T)`.
pub trait MeanFieldModel: Sync {
    fn horizon(&self) -> f64;
    fn x0(&self) -> f64;
    fn sigma(&self) -> f64;
    fn drift(&self, t: f64, x: f64, mean: f64) -> f64;
    fn gain(&self, t: f64) -> f64;
    fn control_cost(&self, t: f64) -> f64;
    fn running_cost(&self, t: f64, x: f64, mean: f64) -> f64;
    fn terminal_cost(&self, x: f64, mean_t: f64) -> f64;
    /// When false the fixed-point map is constant and one evaluation suffices.
    fn depends_on_mean(&self) -> bool;

    /// `inf_α H = c p − ½ (b²/n) p² + f`.
    fn hamiltonian(&self, t: f64, x: f64, mean: f64, p: f64) -> f64 {
        let b = self.gain(t);
        self.drift(t, x, mean) * p - 0.5 * b * b / self.control_cost(t) * p * p + self.running_cost(t, x, mean)
    }

    /// Drift of the state under the minimizer `α̂ = −(b/n) p`.
    fn optimal_drift(&self, t: f64, x: f64, mean: f64, p: f64) -> f64 {
        let b = self.gain(t);
        self.drift(t, x, mean) - b * b / self.control_cost(t) * p
    }
}

impl MeanFieldModel for LQModel {
    fn horizon(&self) -> f64 {
        self.grid().horizon()
    }
    fn x0(&self) -> f64 {
        self.x0
    }
    fn sigma(&self) -> f64 {
        self.sigma
    }
    fn drift(&self, t: f64, x: f64, mean: f64) -> f64 {
        let s = self.sample_at(t);
        s.a * x + s.abar * mean + s.beta
    }
    fn gain(&self, t: f64) -> f64 {
        self.coef_at(&self.b, t)
    }
    fn control_cost(&self, t: f64) -> f64 {
        self.coef_at(&self.n, t)
    }
    fn running_cost(&self, t: f64, x: f64, mean: f64) -> f64 {
        let s = self.sample_at(t);
        let r = s.m * x + s.mbar * mean;
        0.5 * r * r
    }
    fn terminal_cost(&self, x: f64, mean_t: f64) -> f64 {
        let r = self.q * x + self.qbar * mean_t;
        0.5 * r * r
    }
    fn depends_on_mean(&self) -> bool {
        self.qbar != 0.0 || self.abar.iter().chain(&self.mbar).any(|&v| v != 0.0)
    }
}

/// `dx = α dt + σ dW` with running cost `α²/2 + x μ̄` and no terminal cost.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AdditiveRunningCost {
    pub horizon: f64,
    pub x0: f64,
    pub sigma: f64,
}

impl MeanFieldModel for AdditiveRunningCost {
    fn horizon(&self) -> f64 {
        self.horizon
    }
    fn x0(&self) -> f64 {
        self.x0
    }
    fn sigma(&self) -> f64 {
        self.sigma
    }
    fn drift(&self, _: f64, _: f64, _: f64) -> f64 {
        0.0
    }
    fn gain(&self, _: f64) -> f64 {
        1.0
    }
    fn control_cost(&self, _: f64) -> f64 {
        1.0
    }
    fn running_cost(&self, _: f64, x: f64, mean: f64) -> f64 {
        x * mean
    }
    fn terminal_cost(&self, _: f64, _: f64) -> f64 {
        0.0
    }
    fn depends_on_mean(&self) -> bool {
        true
    }
}

/// Abatement `dx = −α dt + σ dW`; the penalty `λ (x − Λ)⁺` applies only when
/// the terminal mean exceeds the cap.
impl MeanFieldModel for EmissionsModel {
    fn horizon(&self) -> f64 {
        self.horizon
    }
    fn x0(&self) -> f64 {
        self.x0
    }
    fn sigma(&self) -> f64 {
        self.sigma
    }
    fn drift(&self, _: f64, _: f64, _: f64) -> f64 {
        0.0
    }
    fn gain(&self, _: f64) -> f64 {
        -1.0
    }
    fn control_cost(&self, _: f64) -> f64 {
        1.0
    }
    fn running_cost(&self, _: f64, _: f64, _: f64) -> f64 {
        0.0
    }
    fn terminal_cost(&self, x: f64, mean_t: f64) -> f64 {
        if mean_t > self.cap {
            self.lambda * (x - self.cap).max(0.0)
        } else {
            0.0
        }
    }
    fn depends_on_mean(&self) -> bool {
        true
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SpaceGrid {
    x_min: f64,
    x_max: f64,
    n_x: usize,
}

impl SpaceGrid {
    pub fn new(x_min: f64, x_max: f64, n_x: usize) -> Result<Self, ModelError> {
        if !(x_min.is_finite() && x_max.is_finite() && x_max > x_min) {
            return Err(ModelError::Parameter(format!("empty space interval [{x_min}, {x_max}]")));
        }
        if n_x < MIN_NX {
            return Err(ModelError::Parameter(format!("n_x must be at least {MIN_NX}, got {n_x}")));
        }
        Ok(Self { x_min, x_max, n_x })
    }

    /// `x0 ± (6σ√T + margin)`.
    pub fn around(x0: f64, sigma: f64, horizon: f64, margin: f64, n_x: usize) -> Result<Self, ModelError> {
        let half = DOMAIN_SDS * sigma * horizon.sqrt() + margin.max(0.0);
        Self::new(x0 - half, x0 + half, n_x)
    }

    pub fn x_min(&self) -> f64 {
        self.x_min
    }
    pub fn x_max(&self) -> f64 {
        self.x_max
    }
    pub fn n_x(&self) -> usize {
        self.n_x
    }
    pub fn dx(&self) -> f64 {
        (self.x_max - self.x_min) / (self.n_x - 1) as f64
    }
    pub fn x(&self, i: usize) -> f64 {
        if i + 1 == self.n_x {
            self.x_max
        } else {
            self.x_min + i as f64 * self.dx()
        }
    }
    pub fn points(&self) -> Vec<f64> {
        (0..self.n_x).map(|i| self.x(i)).collect()
    }

    /// Linear interpolation of node values, clamped at the ends.
    pub fn interpolate(&self, values: &[f64], x: f64) -> f64 {
        let s = ((x - self.x_min) / self.dx()).clamp(0.0, (self.n_x - 1) as f64);
        let i = (s.floor() as usize).min(self.n_x - 2);
        let w = s - i as f64;
        (1.0 - w) * values[i] + w * values[i + 1]
    }
}

/// `values[k][i] ≈ v(t_k, x_i)`.
#[derive(Debug, Clone, PartialEq)]
pub struct ValueSurface {
    pub time: TimeGrid,
    pub space: SpaceGrid,
    pub values: Vec<Vec<f64>>,
}

/// Second-order `∂ₓ` on the nodes, one-sided at the ends.
fn gradient(values: &[f64], dx: f64) -> Vec<f64> {
    let n = values.len();
    let mut p = vec![0.0; n];
    for i in 1..n - 1 {
        p[i] = (values[i + 1] - values[i - 1]) / (2.0 * dx);
    }
    p[0] = (-3.0 * values[0] + 4.0 * values[1] - values[2]) / (2.0 * dx);
    p[n - 1] = (3.0 * values[n - 1] - 4.0 * values[n - 2] + values[n - 3]) / (2.0 * dx);
    p
}

impl ValueSurface {
    pub fn gradient(&self, k: usize) -> Vec<f64> {
        gradient(&self.values[k], self.space.dx())
    }
}

/// `values[k][i]` is the density on the cell centred at `x_i`.
#[derive(Debug, Clone, PartialEq)]
pub struct DensityPath {
    pub time: TimeGrid,
    pub space: SpaceGrid,
    pub values: Vec<Vec<f64>>,
}

impl DensityPath {
    pub fn mass(&self, k: usize) -> f64 {
        self.values[k].iter().sum::<f64>() * self.space.dx()
    }

    pub fn mean(&self, k: usize) -> f64 {
        let dx = self.space.dx();
        self.values[k]
            .iter()
            .enumerate()
            .map(|(i, m)| self.space.x(i) * m)
            .sum::<f64>()
            * dx
            / self.mass(k)
    }

    pub fn mean_flow(&self) -> MeanFlow {
        let values = (0..self.time.n_nodes()).map(|k| self.mean(k)).collect();
        MeanFlow::new(self.time, values).expect("density means are finite")
    }
}

/// Applies `(I + αL)` where `L` is the second difference with `v_xx`
/// extrapolated to the boundary nodes.
fn apply_diffusion(v: &[f64], alpha: f64, dx: f64) -> Vec<f64> {
    let n = v.len();
    let r = alpha / (dx * dx);
    let mut out = vec![0.0; n];
    for i in 1..n - 1 {
        out[i] = v[i] + r * (v[i - 1] - 2.0 * v[i] + v[i + 1]);
    }
    out[0] = v[0] + r * (v[0] - 2.0 * v[1] + v[2]);
    out[n - 1] = v[n - 1] + r * (v[n - 3] - 2.0 * v[n - 2] + v[n - 1]);
    out
}

/// Solves `(I − αL) v = rhs` for the same `L`. The two boundary rows reach
/// one node further than a tridiagonal matrix; they are reduced against their
/// neighbours first.
fn solve_diffusion(rhs: &[f64], alpha: f64, dx: f64) -> Vec<f64> {
    let n = rhs.len();
    let r = alpha / (dx * dx);
    let mut lower = vec![-r; n];
    let mut diag = vec![1.0 + 2.0 * r; n];
    let mut upper = vec![-r; n];
    let mut b = rhs.to_vec();
    // Row 0 is (1 − r, 2r, −r); subtracting row 1 leaves (1, −1, 0).
    diag[0] = 1.0;
    upper[0] = -1.0;
    b[0] = rhs[0] - rhs[1];
    diag[n - 1] = 1.0;
    lower[n - 1] = -1.0;
    b[n - 1] = rhs[n - 1] - rhs[n - 2];
    lower[0] = 0.0;
    upper[n - 1] = 0.0;
    solve_tridiagonal(&lower, &diag, &upper, &mut b);
    b
}

struct HjbContext<'a, M: MeanFieldModel + ?Sized> {
    model: &'a M,
    xs: Vec<f64>,
    dx: f64,
    diffusion: f64,
}

impl<M: MeanFieldModel + ?Sized> HjbContext<'_, M> {
    /// Hamiltonian at every node, with a CFL check on the induced transport.
    fn hamiltonian(&self, t: f64, mean: f64, v: &[f64], dt: f64) -> Result<Vec<f64>, SolveError> {
        let p = gradient(v, self.dx);
        let mut speed: f64 = 0.0;
        let h = self
            .xs
            .iter()
            .zip(&p)
            .map(|(&x, &p)| {
                speed = speed.max(self.model.optimal_drift(t, x, mean, p).abs());
                self.model.hamiltonian(t, x, mean, p)
            })
            .collect();
        if speed > 0.0 {
            let required = (self.dx / speed).min(2.0 * self.diffusion / (speed * speed));
            if dt > required * (1.0 + 1e-12) {
                return Err(SolveError::Cfl { dt, required_dt: required });
            }
        }
        Ok(h)
    }

    fn euler_step(&self, v: &[f64], t: f64, mean: f64, dt: f64) -> Result<Vec<f64>, SolveError> {
        let h = self.hamiltonian(t, mean, v, dt)?;
        let rhs: Vec<f64> = v.iter().zip(&h).map(|(v, h)| v + dt * h).collect();
        Ok(solve_diffusion(&rhs, dt * self.diffusion, self.dx))
    }
}

fn check_flow(time: &TimeGrid, flow: &MeanFlow) -> Result<(), ModelError> {
    if flow.grid() != time {
        return Err(ModelError::GridMismatch("mean flow grid differs from the PDE time grid".into()));
    }
    Ok(())
}

/// Backward sweep of `∂ₜv + ½σ²∂ₓₓv + ℋ(t, x, μ̄_t, ∂ₓv) = 0`, `v(T) = g(·, μ̄_T)`.
pub fn solve_hjb<M: MeanFieldModel + ?Sized>(
    model: &M,
    mean_flow: &MeanFlow,
    space: &SpaceGrid,
) -> Result<ValueSurface, SolveError> {
    let time = *mean_flow.grid();
    if (time.horizon() - model.horizon()).abs() > 1e-12 * model.horizon() {
        return Err(ModelError::GridMismatch("time grid horizon differs from the model horizon".into()).into());
    }
    let ctx = HjbContext {
        model,
        xs: space.points(),
        dx: space.dx(),
        diffusion: 0.5 * model.sigma() * model.sigma(),
    };
    let n = time.n_steps();
    let dt = time.dt();
    let mean = mean_flow.values();
    let mut values = vec![Vec::new(); n + 1];
    values[n] = ctx.xs.iter().map(|&x| model.terminal_cost(x, mean[n])).collect();
    for k in (0..n).rev() {
        let (t1, t0) = (time.t(k + 1), time.t(k));
        let v1 = &values[k + 1];
        let next = if n - k <= STARTUP_STEPS {
            let h = dt / STARTUP_SUBSTEPS as f64;
            let mut v = v1.clone();
            for j in 0..STARTUP_SUBSTEPS {
                let t = t1 - j as f64 * h;
                v = ctx.euler_step(&v, t, mean_flow.at(t), h)?;
            }
            v
        } else {
            let h1 = ctx.hamiltonian(t1, mean[k + 1], v1, dt)?;
            let rhs: Vec<f64> = v1.iter().zip(&h1).map(|(v, h)| v + dt * h).collect();
            let pred = solve_diffusion(&rhs, dt * ctx.diffusion, ctx.dx);
            let h0 = ctx.hamiltonian(t0, mean[k], &pred, dt)?;
            let explicit = apply_diffusion(v1, 0.5 * dt * ctx.diffusion, ctx.dx);
            let rhs: Vec<f64> = explicit
                .iter()
                .zip(h1.iter().zip(&h0))
                .map(|(e, (a, b))| e + 0.5 * dt * (a + b))
                .collect();
            solve_diffusion(&rhs, 0.5 * dt * ctx.diffusion, ctx.dx)
        };
        values[k] = next;
    }
    Ok(ValueSurface {
        time,
        space: *space,
        values,
    })
}

/// `B(z) = z / (eᶻ − 1)`.
fn bernoulli(z: f64) -> f64 {
    if z.abs() < 1e-10 {
        1.0 - 0.5 * z
    } else {
        z / z.exp_m1()
    }
}

/// Gaussian of standard deviation `2·dx` centred at `x0`, normalized on the grid.
pub fn initial_density(space: &SpaceGrid, x0: f64) -> Vec<f64> {
    let w = 2.0 * space.dx();
    let mut m: Vec<f64> = space
        .points()
        .iter()
        .map(|&x| (-0.5 * ((x - x0) / w).powi(2)).exp())
        .collect();
    let mass = m.iter().sum::<f64>() * space.dx();
    m.iter_mut().for_each(|v| *v /= mass);
    m
}

/// Forward sweep of `∂ₜm − ½σ²∂ₓₓm + ∂ₓ(β m) = 0` with zero-flux ends.
/// `drift[k][i]` is `β(t_k, x_i)`.
pub fn solve_kolmogorov(
    drift: &[Vec<f64>],
    sigma: f64,
    time: &TimeGrid,
    space: &SpaceGrid,
    initial: Vec<f64>,
) -> Result<DensityPath, ModelError> {
    let nx = space.n_x();
    if drift.len() != time.n_nodes() || drift.iter().any(|d| d.len() != nx) || initial.len() != nx {
        return Err(ModelError::GridMismatch("drift field or initial density does not match the grids".into()));
    }
    if drift.iter().flatten().any(|v| !v.is_finite()) {
        return Err(ModelError::Parameter("drift field must be finite".into()));
    }
    let dx = space.dx();
    let diff = 0.5 * sigma * sigma;
    let h = time.dt() / KOLMOGOROV_SUBSTEPS as f64;
    let mut values = Vec::with_capacity(time.n_nodes());
    values.push(initial);
    let mut face = vec![0.0; nx - 1];
    for k in 0..time.n_steps() {
        let mut m = values[k].clone();
        for j in 0..KOLMOGOROV_SUBSTEPS {
            let w = (j as f64 + 0.5) / KOLMOGOROV_SUBSTEPS as f64;
            for (i, f) in face.iter_mut().enumerate() {
                let at = |d: &Vec<f64>| 0.5 * (d[i] + d[i + 1]);
                *f = (1.0 - w) * at(&drift[k]) + w * at(&drift[k + 1]);
            }
            // Flux F_{i+½} = (D/dx)[B(−z) m_i − B(z) m_{i+1}], z = β dx / D.
            let c = h * diff / (dx * dx);
            let mut lower = vec![0.0; nx];
            let mut diag = vec![1.0; nx];
            let mut upper = vec![0.0; nx];
            for (i, &beta) in face.iter().enumerate() {
                let z = beta * dx / diff;
                let (bm, bp) = (bernoulli(-z), bernoulli(z));
                diag[i] += c * bm;
                upper[i] -= c * bp;
                diag[i + 1] += c * bp;
                lower[i + 1] -= c * bm;
            }
            solve_tridiagonal(&lower, &diag, &upper, &mut m);
            m.iter_mut().for_each(|v| *v = v.max(0.0));
        }
        values.push(m);
    }
    Ok(DensityPath {
        time: *time,
        space: *space,
        values,
    })
}

/// Optimal drift at every node induced by a value surface.
pub fn feedback_drift<M: MeanFieldModel + ?Sized>(model: &M, value: &ValueSurface, mean_flow: &MeanFlow) -> Vec<Vec<f64>> {
    let xs = value.space.points();
    (0..value.time.n_nodes())
        .map(|k| {
            let t = value.time.t(k);
            let mean = mean_flow.values()[k];
            value
                .gradient(k)
                .iter()
                .zip(&xs)
                .map(|(&p, &x)| model.optimal_drift(t, x, mean, p))
                .collect()
        })
        .collect()
}

/// One application of the fixed-point map.
pub fn apply_map<M: MeanFieldModel + ?Sized>(
    model: &M,
    mean_flow: &MeanFlow,
    space: &SpaceGrid,
) -> Result<(ValueSurface, DensityPath), SolveError> {
    check_flow(mean_flow.grid(), mean_flow)?;
    let value = solve_hjb(model, mean_flow, space)?;
    let drift = feedback_drift(model, &value, mean_flow);
    let density = solve_kolmogorov(
        &drift,
        model.sigma(),
        mean_flow.grid(),
        space,
        initial_density(space, model.x0()),
    )?;
    Ok((value, density))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PicardOptions {
    /// Weight of the new flow in `μ̄ ← θ new + (1 − θ) old`.
    pub damping: f64,
    pub tol: f64,
    pub max_iter: usize,
}

impl Default for PicardOptions {
    fn default() -> Self {
        Self {
            damping: 0.5,
            tol: 1e-6,
            max_iter: 50,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PicardOutcome {
    /// The flow fed to the last map evaluation.
    pub mean_flow: MeanFlow,
    pub value: ValueSurface,
    pub density: DensityPath,
    /// Sup-norm distance between input and output of each map evaluation.
    pub residuals: Vec<f64>,
    pub converged: bool,
}

impl PicardOutcome {
    pub fn iterations(&self) -> usize {
        self.residuals.len()
    }
}

/// Damped Picard iteration started from the constant flow `x0`. Running out
/// of iterations is reported through `converged = false`.
pub fn picard_solve<M: MeanFieldModel + ?Sized>(
    model: &M,
    time: TimeGrid,
    space: &SpaceGrid,
    opts: PicardOptions,
) -> Result<PicardOutcome, SolveError> {
    if !(opts.damping > 0.0 && opts.damping <= 1.0) {
        return Err(ModelError::Parameter(format!("damping must lie in (0, 1], got {}", opts.damping)).into());
    }
    if !(opts.tol > 0.0) || opts.max_iter == 0 {
        return Err(ModelError::Parameter("tol must be positive and max_iter at least 1".into()).into());
    }
    let mut flow = MeanFlow::constant(time, model.x0());
    let mut residuals = Vec::new();
    loop {
        let (value, density) = apply_map(model, &flow, space)?;
        let image = density.mean_flow();
        let residual = image.sup_distance(&flow);
        residuals.push(residual);
        let converged = residual < opts.tol || !model.depends_on_mean();
        if converged || residuals.len() >= opts.max_iter {
            return Ok(PicardOutcome {
                mean_flow: flow,
                value,
                density,
                residuals,
                converged,
            });
        }
        // The constant initial guess carries no information; take the first image whole.
        let theta = if residuals.len() == 1 { 1.0 } else { opts.damping };
        let mixed = flow
            .values()
            .iter()
            .zip(image.values())
            .map(|(old, new)| theta * new + (1.0 - theta) * old)
            .collect();
        flow = MeanFlow::new(time, mixed)?;
    }
}

/// Writes `t,x,v,density` rows for every grid point.
pub fn write_grids_csv<W: Write>(out: W, value: &ValueSurface, density: &DensityPath) -> Result<(), csv::Error> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["t", "x", "v", "density"])?;
    for k in 0..value.time.n_nodes() {
        let t = value.time.t(k);
        for i in 0..value.space.n_x() {
            w.serialize((t, value.space.x(i), value.values[k][i], density.values[k][i]))?;
        }
    }
    w.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn diffusion_operators_are_inverse() {
        let v: Vec<f64> = (0..60).map(|i| ((i as f64) * 0.1).sin() + 0.01 * i as f64).collect();
        let rhs = apply_diffusion(&v, -0.3, 0.1);
        let back = solve_diffusion(&rhs, 0.3, 0.1);
        for (a, b) in v.iter().zip(&back) {
            assert!((a - b).abs() < 1e-10);
        }
    }

    #[test]
    fn quadratics_are_fixed_by_boundary_rule() {
        let xs: Vec<f64> = (0..60).map(|i| -3.0 + 0.1 * i as f64).collect();
        let v: Vec<f64> = xs.iter().map(|x| 0.7 * x * x - x + 2.0).collect();
        let out = apply_diffusion(&v, 0.5, 0.1);
        for (o, x) in out.iter().zip(&v) {
            assert!((o - x - 0.5 * 1.4).abs() < 1e-9);
        }
        let p = gradient(&v, 0.1);
        for (p, x) in p.iter().zip(&xs) {
            assert!((p - (1.4 * x - 1.0)).abs() < 1e-9);
        }
    }

    #[test]
    fn bernoulli_identity() {
        for z in [-3.0, -1e-12, 0.0, 1e-12, 0.5, 7.0] {
            assert!((bernoulli(-z) - bernoulli(z) - z).abs() < 1e-12);
        }
    }

    #[test]
    fn space_grid_validation() {
        assert!(SpaceGrid::new(0.0, 1.0, 49).is_err());
        assert!(SpaceGrid::new(1.0, 0.0, 100).is_err());
        let g = SpaceGrid::around(1.0, 1.0, 1.0, 0.0, 101).unwrap();
        assert_eq!(g.x_min(), -5.0);
        assert_eq!(g.x(100), 7.0);
        assert!((g.dx() - 0.12).abs() < 1e-15);
    }
}
