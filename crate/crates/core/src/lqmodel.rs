//! Model data for the scalar linear-quadratic game: time grids, sampled
//! coefficients, mean flows and the reduction of the adjoint systems to the
//! canonical linear FBSDE
//!
//! ```text
//! dx = [A x + B y + C] dt + σ dW,   x_0 = x0
//! dy = [M x − A y + D] dt + z dW,   y_T = Q x_T + R
//! ```
//!
//! Coefficient functions are given by samples on the grid nodes and are
//! piecewise linear in between.

use serde::{Deserialize, Serialize};

use crate::error::ModelError;
use crate::interp::{midpoint_cubic, quadratic3};

/// Uniform grid on `[0, T]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TimeGrid {
    horizon: f64,
    n_steps: usize,
}

impl TimeGrid {
    pub fn new(horizon: f64, n_steps: usize) -> Result<Self, ModelError> {
        if !(horizon.is_finite() && horizon > 0.0) {
            return Err(ModelError::Horizon(horizon));
        }
        if n_steps < 2 {
            return Err(ModelError::Steps(n_steps));
        }
        Ok(Self { horizon, n_steps })
    }

    pub fn horizon(&self) -> f64 {
        self.horizon
    }

    pub fn n_steps(&self) -> usize {
        self.n_steps
    }

    pub fn n_nodes(&self) -> usize {
        self.n_steps + 1
    }

    pub fn dt(&self) -> f64 {
        self.horizon / self.n_steps as f64
    }

    /// Node `k`; the last node is exactly `T`.
    pub fn t(&self, k: usize) -> f64 {
        if k == self.n_steps {
            self.horizon
        } else {
            self.horizon * k as f64 / self.n_steps as f64
        }
    }

    pub fn points(&self) -> Vec<f64> {
        (0..=self.n_steps).map(|k| self.t(k)).collect()
    }

    /// Interval index and local coordinate in `[0, 1]` for time `t`.
    pub fn locate(&self, t: f64) -> (usize, f64) {
        let s = (t / self.dt()).clamp(0.0, self.n_steps as f64);
        let k = (s.floor() as usize).min(self.n_steps - 1);
        (k, s - k as f64)
    }
}

/// Convenience constructor matching the grid contract.
pub fn make_grid(horizon: f64, n_steps: usize) -> Result<TimeGrid, ModelError> {
    TimeGrid::new(horizon, n_steps)
}

/// Piecewise-linear evaluation of node samples.
pub fn sample_at(grid: &TimeGrid, values: &[f64], t: f64) -> f64 {
    let (k, theta) = grid.locate(t);
    values[k] + theta * (values[k + 1] - values[k])
}

/// A deterministic scalar flow `t ↦ μ̄_t` sampled at the grid nodes.
#[derive(Debug, Clone, PartialEq)]
pub struct MeanFlow {
    grid: TimeGrid,
    values: Vec<f64>,
}

impl MeanFlow {
    pub fn new(grid: TimeGrid, values: Vec<f64>) -> Result<Self, ModelError> {
        if values.len() != grid.n_nodes() {
            return Err(ModelError::SampleCount {
                name: "mean_flow",
                got: values.len(),
                expected: grid.n_nodes(),
            });
        }
        if let Some(node) = values.iter().position(|v| !v.is_finite()) {
            return Err(ModelError::NonFinite {
                name: "mean_flow",
                node,
            });
        }
        Ok(Self { grid, values })
    }

    pub fn constant(grid: TimeGrid, value: f64) -> Self {
        Self {
            grid,
            values: vec![value; grid.n_nodes()],
        }
    }

    pub fn grid(&self) -> &TimeGrid {
        &self.grid
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn terminal(&self) -> f64 {
        *self.values.last().expect("non-empty flow")
    }

    /// Fourth-order value at the midpoint of interval `k`.
    pub fn midpoint(&self, k: usize) -> f64 {
        midpoint_cubic(&self.values, k)
    }

    pub fn at(&self, t: f64) -> f64 {
        sample_at(&self.grid, &self.values, t)
    }

    /// Sup-norm distance to another flow on the same grid.
    pub fn sup_distance(&self, other: &MeanFlow) -> f64 {
        self.values
            .iter()
            .zip(&other.values)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max)
    }
}

/// Samples on the nodes and interval midpoints of a grid (`2n + 1` values).
///
/// The midpoints are what the RK4 stages need; between samples the function
/// is interpolated quadratically.
#[derive(Debug, Clone, PartialEq)]
pub struct HalfSampled(Vec<f64>);

impl HalfSampled {
    pub fn from_fn(grid: &TimeGrid, mut f: impl FnMut(f64) -> f64) -> Self {
        let dt = grid.dt();
        let n = grid.n_steps();
        let mut out = Vec::with_capacity(2 * n + 1);
        for k in 0..n {
            out.push(f(grid.t(k)));
            out.push(f(grid.t(k) + 0.5 * dt));
        }
        out.push(f(grid.t(n)));
        Self(out)
    }

    /// Builds from node values and separately supplied midpoint values.
    pub fn from_nodes_and_mids(nodes: &[f64], mids: &[f64]) -> Self {
        debug_assert_eq!(nodes.len(), mids.len() + 1);
        let mut out = Vec::with_capacity(nodes.len() + mids.len());
        for (v, m) in nodes.iter().zip(mids) {
            out.push(*v);
            out.push(*m);
        }
        out.push(*nodes.last().expect("non-empty"));
        Self(out)
    }

    pub fn constant(grid: &TimeGrid, value: f64) -> Self {
        Self(vec![value; 2 * grid.n_steps() + 1])
    }

    pub fn node(&self, k: usize) -> f64 {
        self.0[2 * k]
    }

    pub fn mid(&self, k: usize) -> f64 {
        self.0[2 * k + 1]
    }

    /// Value inside interval `k` at local coordinate `theta ∈ [0, 1]`.
    pub fn eval_in(&self, k: usize, theta: f64) -> f64 {
        quadratic3(self.0[2 * k], self.0[2 * k + 1], self.0[2 * k + 2], theta)
    }

    pub fn nodes(&self) -> Vec<f64> {
        self.0.iter().step_by(2).copied().collect()
    }

    pub fn raw(&self) -> &[f64] {
        &self.0
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Self {
        Self(self.0.iter().map(|&v| f(v)).collect())
    }

    pub fn zip_with(&self, other: &Self, f: impl Fn(f64, f64) -> f64) -> Self {
        Self(self.0.iter().zip(&other.0).map(|(&a, &b)| f(a, b)).collect())
    }
}

/// Coefficients of the canonical linear FBSDE.
///
/// Field names: `a` = 𝔞 (state feedback in both equations), `b` = 𝔟 (control
/// gain, negative), `c` = 𝔠 (forward offset), `m` = 𝔪 (state cost, ≤ 0),
/// `d` = 𝔡 (backward offset), `q` = 𝔮 (terminal slope), `r` = 𝔯 (terminal
/// offset).
#[derive(Debug, Clone, PartialEq)]
pub struct ReducedCoefficients {
    pub grid: TimeGrid,
    pub a: HalfSampled,
    pub b: HalfSampled,
    pub c: HalfSampled,
    pub m: HalfSampled,
    pub d: HalfSampled,
    pub q: f64,
    pub r: f64,
    pub sigma: f64,
}

impl ReducedCoefficients {
    /// True when the sign conditions 𝔟 < 0, 𝔪 ≤ 0, 𝔮 ≥ 0 hold at every sample.
    pub fn has_right_signs(&self) -> bool {
        self.b.raw().iter().all(|&v| v < 0.0)
            && self.m.raw().iter().all(|&v| v <= 0.0)
            && self.q >= 0.0
    }
}

/// One coefficient in a model file: a constant or node samples.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum CoefficientSpec {
    Constant(f64),
    Samples(Vec<f64>),
}

impl Default for CoefficientSpec {
    fn default() -> Self {
        CoefficientSpec::Constant(0.0)
    }
}

impl From<f64> for CoefficientSpec {
    fn from(v: f64) -> Self {
        CoefficientSpec::Constant(v)
    }
}

fn one() -> CoefficientSpec {
    CoefficientSpec::Constant(1.0)
}

/// Serializable description of an LQ model (the JSON model file).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LQModelSpec {
    #[serde(rename = "T")]
    pub horizon: f64,
    pub n_steps: usize,
    #[serde(default)]
    pub a: CoefficientSpec,
    #[serde(default)]
    pub abar: CoefficientSpec,
    #[serde(default = "one")]
    pub b: CoefficientSpec,
    #[serde(default)]
    pub beta: CoefficientSpec,
    #[serde(default)]
    pub m: CoefficientSpec,
    #[serde(default)]
    pub mbar: CoefficientSpec,
    #[serde(default = "one")]
    pub n: CoefficientSpec,
    #[serde(default)]
    pub q: f64,
    #[serde(default)]
    pub qbar: f64,
    pub sigma: f64,
    pub x0: f64,
}

impl LQModelSpec {
    /// The running example: `dx = α dt + σ dW`, cost `α²/2` plus the
    /// terminal `(q x + q̄ μ̄)²/2`.
    pub fn simple(q: f64, qbar: f64, x0: f64, horizon: f64, sigma: f64, n_steps: usize) -> Self {
        Self {
            horizon,
            n_steps,
            a: 0.0.into(),
            abar: 0.0.into(),
            b: 1.0.into(),
            beta: 0.0.into(),
            m: 0.0.into(),
            mbar: 0.0.into(),
            n: 1.0.into(),
            q,
            qbar,
            sigma,
            x0,
        }
    }

    pub fn from_json_str(text: &str) -> Result<Self, serde_json::Error> {
        serde_json::from_str(text)
    }

    pub fn build(&self) -> Result<LQModel, ModelError> {
        LQModel::from_spec(self)
    }
}

/// Linear-quadratic model with coefficients sampled on a time grid.
#[derive(Debug, Clone, PartialEq)]
pub struct LQModel {
    grid: TimeGrid,
    pub a: Vec<f64>,
    pub abar: Vec<f64>,
    pub b: Vec<f64>,
    pub beta: Vec<f64>,
    pub m: Vec<f64>,
    pub mbar: Vec<f64>,
    pub n: Vec<f64>,
    pub q: f64,
    pub qbar: f64,
    pub sigma: f64,
    pub x0: f64,
}

fn broadcast(
    name: &'static str,
    spec: &CoefficientSpec,
    grid: &TimeGrid,
) -> Result<Vec<f64>, ModelError> {
    let values = match spec {
        CoefficientSpec::Constant(v) => vec![*v; grid.n_nodes()],
        CoefficientSpec::Samples(v) if v.len() == grid.n_nodes() => v.clone(),
        CoefficientSpec::Samples(v) => {
            return Err(ModelError::SampleCount {
                name,
                got: v.len(),
                expected: grid.n_nodes(),
            })
        }
    };
    if let Some(node) = values.iter().position(|v| !v.is_finite()) {
        return Err(ModelError::NonFinite { name, node });
    }
    Ok(values)
}

fn finite_scalar(name: &str, v: f64) -> Result<(), ModelError> {
    if v.is_finite() {
        Ok(())
    } else {
        Err(ModelError::Parameter(format!("{name} must be finite")))
    }
}

impl LQModel {
    pub fn from_spec(spec: &LQModelSpec) -> Result<Self, ModelError> {
        let grid = TimeGrid::new(spec.horizon, spec.n_steps)?;
        let model = Self {
            grid,
            a: broadcast("a", &spec.a, &grid)?,
            abar: broadcast("abar", &spec.abar, &grid)?,
            b: broadcast("b", &spec.b, &grid)?,
            beta: broadcast("beta", &spec.beta, &grid)?,
            m: broadcast("m", &spec.m, &grid)?,
            mbar: broadcast("mbar", &spec.mbar, &grid)?,
            n: broadcast("n", &spec.n, &grid)?,
            q: spec.q,
            qbar: spec.qbar,
            sigma: spec.sigma,
            x0: spec.x0,
        };
        model.validate()?;
        Ok(model)
    }

    fn validate(&self) -> Result<(), ModelError> {
        for (name, values) in [("b", &self.b), ("n", &self.n)] {
            if let Some((node, &value)) = values.iter().enumerate().find(|(_, &v)| v <= 0.0) {
                return Err(ModelError::NotPositive { name, node, value });
            }
        }
        finite_scalar("q", self.q)?;
        finite_scalar("qbar", self.qbar)?;
        finite_scalar("x0", self.x0)?;
        if !(self.sigma.is_finite() && self.sigma > 0.0) {
            return Err(ModelError::Parameter(format!(
                "sigma must be positive, got {}",
                self.sigma
            )));
        }
        Ok(())
    }

    pub fn grid(&self) -> &TimeGrid {
        &self.grid
    }

    /// Same model with a different volatility (must stay positive).
    pub fn with_sigma(&self, sigma: f64) -> Result<Self, ModelError> {
        let mut out = self.clone();
        out.sigma = sigma;
        out.validate()?;
        Ok(out)
    }

    /// Coefficient value at an arbitrary time (piecewise-linear).
    pub fn coef_at(&self, values: &[f64], t: f64) -> f64 {
        sample_at(&self.grid, values, t)
    }

    /// Node and midpoint samples of a derived coefficient `f(t, a, abar, b, beta, m, mbar, n)`.
    pub(crate) fn half_sampled(&self, f: impl Fn(&CoefSample) -> f64) -> HalfSampled {
        let n = self.grid.n_steps();
        let mut nodes = Vec::with_capacity(n + 1);
        let mut mids = Vec::with_capacity(n);
        for k in 0..=n {
            nodes.push(f(&self.sample_node(k)));
        }
        for k in 0..n {
            mids.push(f(&self.sample_mid(k)));
        }
        HalfSampled::from_nodes_and_mids(&nodes, &mids)
    }

    pub(crate) fn sample_node(&self, k: usize) -> CoefSample {
        CoefSample {
            a: self.a[k],
            abar: self.abar[k],
            b: self.b[k],
            beta: self.beta[k],
            m: self.m[k],
            mbar: self.mbar[k],
            n: self.n[k],
        }
    }

    pub(crate) fn sample_mid(&self, k: usize) -> CoefSample {
        let avg = |v: &[f64]| 0.5 * (v[k] + v[k + 1]);
        CoefSample {
            a: avg(&self.a),
            abar: avg(&self.abar),
            b: avg(&self.b),
            beta: avg(&self.beta),
            m: avg(&self.m),
            mbar: avg(&self.mbar),
            n: avg(&self.n),
        }
    }

    pub(crate) fn sample_at(&self, t: f64) -> CoefSample {
        CoefSample {
            a: self.coef_at(&self.a, t),
            abar: self.coef_at(&self.abar, t),
            b: self.coef_at(&self.b, t),
            beta: self.coef_at(&self.beta, t),
            m: self.coef_at(&self.m, t),
            mbar: self.coef_at(&self.mbar, t),
            n: self.coef_at(&self.n, t),
        }
    }

    fn check_flow(&self, flow: &MeanFlow, what: &str) -> Result<(), ModelError> {
        if flow.grid() != &self.grid {
            return Err(ModelError::GridMismatch(format!(
                "{what} lives on a different grid than the model"
            )));
        }
        Ok(())
    }
}

/// Raw coefficient values at one instant.
#[derive(Debug, Clone, Copy)]
pub(crate) struct CoefSample {
    pub a: f64,
    pub abar: f64,
    pub b: f64,
    pub beta: f64,
    pub m: f64,
    pub mbar: f64,
    pub n: f64,
}

impl CoefSample {
    pub fn gain(&self) -> f64 {
        self.b * self.b / self.n
    }
}

/// Flow values on nodes and midpoints.
fn flow_half(flow: &MeanFlow) -> HalfSampled {
    let n = flow.grid().n_steps();
    let mids: Vec<f64> = (0..n).map(|k| flow.midpoint(k)).collect();
    HalfSampled::from_nodes_and_mids(flow.values(), &mids)
}

/// Canonical coefficients of the individual MFG problem with the mean flow frozen.
pub fn reduce_mfg(model: &LQModel, mean_flow: &MeanFlow) -> Result<ReducedCoefficients, ModelError> {
    model.check_flow(mean_flow, "mean flow")?;
    let mu = flow_half(mean_flow);
    let raw = |f: &dyn Fn(&CoefSample) -> f64| model.half_sampled(f);
    let abar = raw(&|s| s.abar);
    let beta = raw(&|s| s.beta);
    let mmbar = raw(&|s| s.m * s.mbar);
    Ok(ReducedCoefficients {
        grid: *model.grid(),
        a: raw(&|s| s.a),
        b: raw(&|s| -s.gain()),
        c: beta.zip_with(&abar.zip_with(&mu, |ab, mu| ab * mu), |b, x| b + x),
        m: raw(&|s| -s.m * s.m),
        d: mmbar.zip_with(&mu, |mm, mu| -mm * mu),
        q: model.q * model.q,
        r: model.q * model.qbar * mean_flow.terminal(),
        sigma: model.sigma,
    })
}

/// Canonical coefficients of the MKV adjoint system once the means `(x̄, ȳ)`
/// are known.
pub fn reduce_mkv(
    model: &LQModel,
    xbar: &MeanFlow,
    ybar: &MeanFlow,
) -> Result<ReducedCoefficients, ModelError> {
    model.check_flow(xbar, "xbar")?;
    model.check_flow(ybar, "ybar")?;
    let xh = flow_half(xbar);
    let yh = flow_half(ybar);
    let raw = |f: &dyn Fn(&CoefSample) -> f64| model.half_sampled(f);
    let abar = raw(&|s| s.abar);
    let beta = raw(&|s| s.beta);
    let cross = raw(&|s| s.mbar * (2.0 * s.m + s.mbar));
    let d_state = cross.zip_with(&xh, |c, x| -c * x);
    let d_adj = abar.zip_with(&yh, |ab, y| ab * y);
    Ok(ReducedCoefficients {
        grid: *model.grid(),
        a: raw(&|s| s.a),
        b: raw(&|s| -s.gain()),
        c: beta.zip_with(&abar.zip_with(&xh, |ab, x| ab * x), |b, x| b + x),
        m: raw(&|s| -s.m * s.m),
        d: d_state.zip_with(&d_adj, |s, a| s - a),
        q: model.q * model.q,
        r: model.qbar * (2.0 * model.q + model.qbar) * xbar.terminal(),
        sigma: model.sigma,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn simple(q: f64, qbar: f64) -> LQModel {
        LQModelSpec::simple(q, qbar, 1.0, 1.0, 0.3, 20).build().unwrap()
    }

    #[test]
    fn grid_points_are_uniform() {
        let g = make_grid(1.0, 4).unwrap();
        assert_eq!(g.points(), vec![0.0, 0.25, 0.5, 0.75, 1.0]);
        let g = make_grid(2.0, 1000).unwrap();
        assert!((g.dt() - 0.002).abs() < 1e-15);
        assert_eq!(g.t(1000), 2.0);
        assert!(make_grid(0.0, 10).is_err());
        assert!(make_grid(-1.0, 10).is_err());
        assert!(make_grid(1.0, 1).is_err());
    }

    #[test]
    fn simple_example_reduces_to_unit_coefficients() {
        let model = simple(1.0, 0.0);
        let flow = MeanFlow::constant(*model.grid(), 0.7);
        let rc = reduce_mfg(&model, &flow).unwrap();
        for &v in rc.a.raw() {
            assert_eq!(v, 0.0);
        }
        for &v in rc.b.raw() {
            assert_eq!(v, -1.0);
        }
        assert!(rc.c.raw().iter().all(|&v| v == 0.0));
        assert!(rc.m.raw().iter().all(|&v| v == 0.0));
        assert!(rc.d.raw().iter().all(|&v| v == 0.0));
        assert_eq!(rc.q, 1.0);
        assert_eq!(rc.r, 0.0);
    }

    #[test]
    fn zero_m_kills_backward_offset() {
        let mut spec = LQModelSpec::simple(1.0, 0.0, 1.0, 1.0, 0.3, 10);
        spec.mbar = 5.0.into();
        let model = spec.build().unwrap();
        let flow = MeanFlow::constant(*model.grid(), 2.0);
        let rc = reduce_mfg(&model, &flow).unwrap();
        assert!(rc.d.raw().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn forward_offset_by_hand() {
        let mut spec = LQModelSpec::simple(1.0, 0.0, 1.0, 1.0, 0.3, 10);
        spec.a = 1.0.into();
        spec.abar = 2.0.into();
        spec.beta = 0.5.into();
        let model = spec.build().unwrap();
        let rc = reduce_mfg(&model, &MeanFlow::constant(*model.grid(), 3.0)).unwrap();
        for &v in rc.c.raw() {
            assert!((v - 6.5).abs() < 1e-14);
        }
    }

    #[test]
    fn mkv_terminal_offset_differs_from_mfg() {
        let model = simple(1.0, 1.0);
        let g = *model.grid();
        let one = MeanFlow::constant(g, 1.0);
        let zero = MeanFlow::constant(g, 0.0);
        let mkv = reduce_mkv(&model, &one, &zero).unwrap();
        assert_eq!(mkv.r, 3.0);
        let mfg = reduce_mfg(&model, &one).unwrap();
        assert_eq!(mfg.r, 1.0);
    }

    #[test]
    fn mkv_offsets_vanish_without_interaction() {
        let mut spec = LQModelSpec::simple(1.0, 0.0, 1.0, 1.0, 0.3, 10);
        spec.m = 0.0.into();
        spec.mbar = 0.0.into();
        spec.abar = 0.0.into();
        let model = spec.build().unwrap();
        let g = *model.grid();
        let rc = reduce_mkv(&model, &MeanFlow::constant(g, 4.0), &MeanFlow::constant(g, -2.0))
            .unwrap();
        assert!(rc.d.raw().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn rejects_nonpositive_b_and_n() {
        let mut spec = LQModelSpec::simple(1.0, 0.0, 1.0, 1.0, 0.3, 4);
        spec.b = CoefficientSpec::Samples(vec![1.0, 1.0, 0.0, 1.0, 1.0]);
        assert!(matches!(
            spec.build(),
            Err(ModelError::NotPositive { name: "b", node: 2, .. })
        ));
        let mut spec = LQModelSpec::simple(1.0, 0.0, 1.0, 1.0, 0.3, 4);
        spec.n = (-1.0).into();
        assert!(spec.build().is_err());
        let mut spec = LQModelSpec::simple(1.0, 0.0, 1.0, 1.0, 0.0, 4);
        spec.sigma = 0.0;
        assert!(spec.build().is_err());
    }

    #[test]
    fn rejects_wrong_sample_count_and_grid_mismatch() {
        let mut spec = LQModelSpec::simple(1.0, 0.0, 1.0, 1.0, 0.3, 4);
        spec.a = CoefficientSpec::Samples(vec![0.0; 3]);
        assert!(matches!(spec.build(), Err(ModelError::SampleCount { .. })));
        let model = simple(1.0, 0.0);
        let other = MeanFlow::constant(make_grid(1.0, 7).unwrap(), 0.0);
        assert!(matches!(
            reduce_mfg(&model, &other),
            Err(ModelError::GridMismatch(_))
        ));
    }

    #[test]
    fn model_json_accepts_scalars_and_arrays() {
        let text = r#"{"T": 1.0, "n_steps": 2, "a": [0.0, 0.5, 1.0], "abar": 0, "b": 1,
            "beta": 0, "m": 0, "mbar": 0, "n": 1, "q": 1, "qbar": 0.5, "sigma": 0.2, "x0": 1}"#;
        let model = LQModelSpec::from_json_str(text).unwrap().build().unwrap();
        assert_eq!(model.a, vec![0.0, 0.5, 1.0]);
        assert!((model.coef_at(&model.a, 0.25) - 0.25).abs() < 1e-15);
        assert!(LQModelSpec::from_json_str(r#"{"T": 1.0}"#).is_err());
        assert!(LQModelSpec::from_json_str(r#"{"T":1,"n_steps":2,"sigma":1,"x0":0,"zzz":1}"#).is_err());
    }
}
