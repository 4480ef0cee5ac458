//! Scalar fixed-point equations for the terminal mean in the worked examples
//! with `dx = α dt + σ dW`, and the closed-form mean flows of the
//! additive-running-cost and zero-terminal examples.
//!
//! Each solver returns the MFG and MKV answers through the same report type so
//! the two can be tabulated side by side.

use serde::Serialize;

use crate::error::{ModelError, SolveError};
use crate::lqmodel::{LQModelSpec, MeanFlow, TimeGrid};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Mode {
    #[serde(rename = "MFG")]
    Mfg,
    #[serde(rename = "MKV")]
    Mkv,
}

impl Mode {
    pub fn label(self) -> &'static str {
        match self {
            Mode::Mfg => "MFG",
            Mode::Mkv => "MKV",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Existence {
    Unique,
    Multiple,
    None,
    Continuum,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FixedPointReport {
    pub mode: Mode,
    /// Sorted ascending. Empty for `None` and `Continuum`.
    pub roots: Vec<f64>,
    pub existence: Existence,
    /// Denominator or discriminant deciding solvability; `NaN` when the
    /// equation has no such scalar.
    pub solvability_margin: f64,
    /// Set when a repeated root was collapsed into one entry.
    pub double_root: bool,
}

impl FixedPointReport {
    fn from_roots(mode: Mode, mut roots: Vec<f64>, margin: f64, double_root: bool) -> Self {
        roots.sort_by(f64::total_cmp);
        let existence = match roots.len() {
            0 => Existence::None,
            1 => Existence::Unique,
            _ => Existence::Multiple,
        };
        Self {
            mode,
            roots,
            existence,
            solvability_margin: margin,
            double_root,
        }
    }
}

fn check_horizon(horizon: f64) -> Result<(), ModelError> {
    if horizon.is_finite() && horizon > 0.0 {
        Ok(())
    } else {
        Err(ModelError::Horizon(horizon))
    }
}

/// Terminal cost `r x μ̄` (MFG) / `r x E x` (MKV):
/// `(1 + rT) μ̄_T = x0` and `(1 + 2rT) E x_T = x0`.
pub fn linear_terminal(r: f64, horizon: f64, x0: f64, mode: Mode) -> Result<FixedPointReport, ModelError> {
    check_horizon(horizon)?;
    let factor = match mode {
        Mode::Mfg => 1.0,
        Mode::Mkv => 2.0,
    };
    let denom = 1.0 + factor * r * horizon;
    if denom == 0.0 {
        let existence = if x0 == 0.0 {
            Existence::Continuum
        } else {
            Existence::None
        };
        return Ok(FixedPointReport {
            mode,
            roots: Vec::new(),
            existence,
            solvability_margin: denom,
            double_root: false,
        });
    }
    Ok(FixedPointReport::from_roots(mode, vec![x0 / denom], denom, false))
}

/// Real roots of `a u² + b u + c = 0` without cancellation. Returns the roots
/// and whether a double root was collapsed.
fn stable_quadratic_roots(a: f64, b: f64, c: f64) -> (Vec<f64>, bool) {
    if a == 0.0 {
        return if b == 0.0 {
            (Vec::new(), false)
        } else {
            (vec![-c / b], false)
        };
    }
    let disc = b * b - 4.0 * a * c;
    if disc < 0.0 {
        return (Vec::new(), false);
    }
    if disc == 0.0 {
        return (vec![-b / (2.0 * a)], true);
    }
    let q = -0.5 * (b + b.signum() * disc.sqrt());
    let (r1, r2) = if q == 0.0 { (0.0, 0.0) } else { (q / a, c / q) };
    (vec![r1, r2], false)
}

/// Terminal cost `r x μ̄²` (MFG) / `r x (E x)²` (MKV):
/// `rT μ̄² + μ̄ − x0 = 0` and `3rT E{x_T}² + E{x_T} − x0 = 0`.
pub fn quadratic_terminal(r: f64, horizon: f64, x0: f64, mode: Mode) -> Result<FixedPointReport, ModelError> {
    check_horizon(horizon)?;
    let lead = match mode {
        Mode::Mfg => r * horizon,
        Mode::Mkv => 3.0 * r * horizon,
    };
    let margin = 1.0 + 4.0 * lead * x0;
    let (roots, double) = stable_quadratic_roots(lead, 1.0, -x0);
    Ok(FixedPointReport::from_roots(mode, roots, margin, double))
}

/// Membership of `(r, T, x0)` in the solvability set of the quadratic terminal cost.
pub fn quadratic_solvable(r: f64, horizon: f64, x0: f64, mode: Mode) -> bool {
    let lead = match mode {
        Mode::Mfg => r * horizon,
        Mode::Mkv => 3.0 * r * horizon,
    };
    1.0 + 4.0 * lead * x0 >= 0.0
}

/// Where to look for roots of a scalar equation.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Bracket {
    /// Start at `[−|x0|−1, |x0|+1]` and double up to 2²⁰ times.
    Auto,
    Fixed(f64, f64),
}

const SCAN_CELLS: usize = 4096;
const MAX_DOUBLINGS: u32 = 20;
const ROOT_TOL: f64 = 1e-12;

fn bisect(f: &impl Fn(f64) -> f64, mut lo: f64, mut hi: f64, mut flo: f64) -> f64 {
    while hi - lo > ROOT_TOL {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        let fm = f(mid);
        if fm == 0.0 {
            return mid;
        }
        if (fm < 0.0) == (flo < 0.0) {
            lo = mid;
            flo = fm;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

/// Sign changes of `f` on a uniform scan of `[lo, hi]`, each refined by bisection.
/// Tangential roots without a sign change are not detected.
fn scan_roots(f: &impl Fn(f64) -> f64, lo: f64, hi: f64) -> Vec<f64> {
    let h = (hi - lo) / SCAN_CELLS as f64;
    let mut roots: Vec<f64> = Vec::new();
    let mut x_prev = lo;
    let mut f_prev = f(lo);
    if f_prev == 0.0 {
        roots.push(lo);
    }
    for i in 1..=SCAN_CELLS {
        let x = if i == SCAN_CELLS { hi } else { lo + h * i as f64 };
        let fx = f(x);
        if fx == 0.0 {
            roots.push(x);
        } else if f_prev != 0.0 && fx.is_finite() && f_prev.is_finite() && (fx < 0.0) != (f_prev < 0.0) {
            roots.push(bisect(f, x_prev, x, f_prev));
        }
        x_prev = x;
        f_prev = fx;
    }
    roots
}

/// All roots of `f` found by sign-scan and bisection.
pub fn find_roots(f: impl Fn(f64) -> f64, x0: f64, bracket: Bracket) -> Vec<f64> {
    match bracket {
        Bracket::Fixed(lo, hi) => scan_roots(&f, lo.min(hi), lo.max(hi)),
        Bracket::Auto => {
            let mut half = x0.abs() + 1.0;
            for _ in 0..=MAX_DOUBLINGS {
                let roots = scan_roots(&f, -half, half);
                if !roots.is_empty() {
                    return roots;
                }
                half *= 2.0;
            }
            Vec::new()
        }
    }
}

/// Terminal cost `x γ(μ̄)`: MFG `μ̄ = x0 − Tγ(μ̄)`, MKV `μ̄ = x0 − T[γ′(μ̄)μ̄ + γ(μ̄)]`.
pub fn general_linear_terminal(
    gamma: impl Fn(f64) -> f64,
    gamma_prime: impl Fn(f64) -> f64,
    horizon: f64,
    x0: f64,
    mode: Mode,
    bracket: Bracket,
) -> Result<FixedPointReport, ModelError> {
    check_horizon(horizon)?;
    let roots = match mode {
        Mode::Mfg => find_roots(|u| u - x0 + horizon * gamma(u), x0, bracket),
        Mode::Mkv => find_roots(|u| u - x0 + horizon * (gamma_prime(u) * u + gamma(u)), x0, bracket),
    };
    Ok(FixedPointReport::from_roots(mode, roots, f64::NAN, false))
}

/// Terminal cost `γ(μ̄) x²`: `μ̄_T (1 + 2Tγ(μ̄_T)) = x0`. Only the MFG
/// version reduces to an equation for the mean.
pub fn quadratic_cost_mfg(
    gamma: impl Fn(f64) -> f64,
    horizon: f64,
    x0: f64,
    mode: Mode,
    bracket: Bracket,
) -> Result<FixedPointReport, SolveError> {
    check_horizon(horizon)?;
    if mode == Mode::Mkv {
        return Err(SolveError::Unsupported(
            "the MKV problem with terminal cost γ(E x)x²/2 does not reduce to an equation for the mean",
        ));
    }
    let roots = find_roots(|u| u * (1.0 + 2.0 * horizon * gamma(u)) - x0, x0, bracket);
    Ok(FixedPointReport::from_roots(mode, roots, f64::NAN, false))
}

/// Mean flow for running cost `α²/2 + x μ̄`, no terminal cost:
/// `x0 cosh(k(T − t)) / cosh(kT)` with `k = 1` (MFG) or `√2` (MKV).
pub fn additive_running_mean(horizon: f64, x0: f64, mode: Mode, t: f64) -> Result<f64, ModelError> {
    check_horizon(horizon)?;
    if !(0.0..=horizon).contains(&t) {
        return Err(ModelError::Parameter(format!("time {t} outside [0, {horizon}]")));
    }
    let k = match mode {
        Mode::Mfg => 1.0,
        Mode::Mkv => std::f64::consts::SQRT_2,
    };
    let num = 1.0 + (-2.0 * k * (horizon - t)).exp();
    let den = 1.0 + (-2.0 * k * horizon).exp();
    Ok(x0 * (-k * t).exp() * num / den)
}

/// Node samples of [`additive_running_mean`].
pub fn additive_running_flow(grid: TimeGrid, x0: f64, mode: Mode) -> MeanFlow {
    let values = grid
        .points()
        .into_iter()
        .map(|t| additive_running_mean(grid.horizon(), x0, mode, t).expect("grid point inside horizon"))
        .collect();
    MeanFlow::new(grid, values).expect("closed form is finite")
}

/// With `f = α²/2 + (x − μ̄)²/2` and `g = 0` the mean never moves, in both
/// formulations.
pub fn lq_zero_terminal_mean(grid: TimeGrid, x0: f64, _mode: Mode) -> MeanFlow {
    MeanFlow::constant(grid, x0)
}

/// The same example written as an LQ model (`m = 1`, `m̄ = −1`, `q = q̄ = 0`).
pub fn lq_zero_terminal_model(horizon: f64, x0: f64, sigma: f64, n_steps: usize) -> LQModelSpec {
    LQModelSpec {
        m: 1.0.into(),
        mbar: (-1.0).into(),
        ..LQModelSpec::simple(0.0, 0.0, x0, horizon, sigma, n_steps)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn linear_terminal_values() {
        let mfg = linear_terminal(1.0, 1.0, 1.0, Mode::Mfg).unwrap();
        let mkv = linear_terminal(1.0, 1.0, 1.0, Mode::Mkv).unwrap();
        assert_eq!(mfg.roots, vec![0.5]);
        assert_eq!(mkv.roots, vec![1.0 / 3.0]);
        assert_eq!(linear_terminal(0.0, 2.0, 0.7, Mode::Mkv).unwrap().roots, vec![0.7]);
    }

    #[test]
    fn linear_terminal_degenerate() {
        let cont = linear_terminal(-1.0, 1.0, 0.0, Mode::Mfg).unwrap();
        assert_eq!(cont.existence, Existence::Continuum);
        assert!(cont.roots.is_empty());
        let none = linear_terminal(-1.0, 1.0, 0.3, Mode::Mfg).unwrap();
        assert_eq!(none.existence, Existence::None);
        let mkv = linear_terminal(-0.5, 1.0, 0.3, Mode::Mkv).unwrap();
        assert_eq!(mkv.existence, Existence::None);
        // The MFG degeneracy is regular for MKV.
        assert_eq!(linear_terminal(-1.0, 1.0, 1.0, Mode::Mkv).unwrap().roots, vec![-1.0]);
    }

    #[test]
    fn quadratic_terminal_worked_values() {
        let mkv = quadratic_terminal(-1.0, 1.0, 1.0 / 12.0, Mode::Mkv).unwrap();
        assert_eq!(mkv.existence, Existence::Unique);
        assert!(mkv.double_root);
        assert!((mkv.roots[0] - 1.0 / 6.0).abs() < 1e-15);
        assert_eq!(mkv.solvability_margin, 0.0);
        let mfg = quadratic_terminal(-1.0, 1.0, 1.0 / 12.0, Mode::Mfg).unwrap();
        let s6 = 6f64.sqrt();
        assert_eq!(mfg.existence, Existence::Multiple);
        assert!((mfg.roots[0] - (3.0 - s6) / 6.0).abs() < 1e-15);
        assert!((mfg.roots[1] - (3.0 + s6) / 6.0).abs() < 1e-15);
        let lin = quadratic_terminal(0.0, 1.0, 0.4, Mode::Mfg).unwrap();
        assert_eq!(lin.roots, vec![0.4]);
    }

    #[test]
    fn stable_formula_for_tiny_lead() {
        let rep = quadratic_terminal(1e-12, 1.0, 1.0, Mode::Mfg).unwrap();
        let small = rep.roots[1];
        assert!((1e-12 * small * small + small - 1.0).abs() < 1e-15);
    }

    #[test]
    fn general_linear_reduces_to_closed_forms() {
        for mode in [Mode::Mfg, Mode::Mkv] {
            let g = general_linear_terminal(|u| 0.8 * u, |_| 0.8, 1.5, 2.0, mode, Bracket::Auto).unwrap();
            let c = linear_terminal(0.8, 1.5, 2.0, mode).unwrap();
            assert!((g.roots[0] - c.roots[0]).abs() < 1e-12);
            let g = general_linear_terminal(|u| -u * u, |u| -2.0 * u, 1.0, 0.05, mode, Bracket::Auto).unwrap();
            let c = quadratic_terminal(-1.0, 1.0, 0.05, mode).unwrap();
            assert_eq!(g.roots.len(), c.roots.len());
            for (a, b) in g.roots.iter().zip(&c.roots) {
                assert!((a - b).abs() < 1e-11);
            }
        }
    }

    #[test]
    fn sine_terminal_cost_root() {
        // Bisection oracle at 1e-14 on u + sin u − 1.
        let (mut lo, mut hi) = (0.0f64, 1.0f64);
        while hi - lo > 1e-14 {
            let mid = 0.5 * (lo + hi);
            if mid + mid.sin() - 1.0 < 0.0 {
                lo = mid
            } else {
                hi = mid
            }
        }
        let rep = general_linear_terminal(f64::sin, f64::cos, 1.0, 1.0, Mode::Mfg, Bracket::Auto).unwrap();
        assert_eq!(rep.existence, Existence::Unique);
        assert!((rep.roots[0] - lo).abs() < 1e-12);
        assert!((rep.roots[0] - 0.510_973).abs() < 1e-6);
    }

    #[test]
    fn no_root_reported_not_fatal() {
        let rep = general_linear_terminal(|_| 1.0, |_| 0.0, 1.0, 0.0, Mode::Mfg, Bracket::Fixed(0.0, 0.5)).unwrap();
        assert_eq!(rep.existence, Existence::None);
        let none = find_roots(|u| 1.0 + u * u, 0.0, Bracket::Auto);
        assert!(none.is_empty());
    }

    #[test]
    fn quadratic_cost_examples() {
        let z = quadratic_cost_mfg(|_| 0.0, 1.0, 0.3, Mode::Mfg, Bracket::Auto).unwrap();
        assert!((z.roots[0] - 0.3).abs() < 1e-12);
        let c = quadratic_cost_mfg(|_| 0.25, 2.0, 0.3, Mode::Mfg, Bracket::Auto).unwrap();
        assert!((c.roots[0] - 0.15).abs() < 1e-12);
        let q = quadratic_cost_mfg(|u| u, 1.0, 1.0, Mode::Mfg, Bracket::Fixed(0.0, 2.0)).unwrap();
        assert_eq!(q.roots.len(), 1);
        assert!((q.roots[0] - 0.5).abs() < 1e-12);
        assert!(matches!(
            quadratic_cost_mfg(|u| u, 1.0, 1.0, Mode::Mkv, Bracket::Auto),
            Err(SolveError::Unsupported(_))
        ));
    }

    #[test]
    fn additive_running_values() {
        let e = std::f64::consts::E;
        let s2 = std::f64::consts::SQRT_2;
        assert_eq!(additive_running_mean(1.0, 1.0, Mode::Mfg, 0.0).unwrap(), 1.0);
        assert!((additive_running_mean(1.0, 1.0, Mode::Mfg, 1.0).unwrap() - 2.0 / (e + 1.0 / e)).abs() < 1e-15);
        let mkv_t = additive_running_mean(1.0, 1.0, Mode::Mkv, 1.0).unwrap();
        assert!((mkv_t - 2.0 / (s2.exp() + (-s2).exp())).abs() < 1e-15);
        assert!((mkv_t - 0.459_098).abs() < 1e-6);
        assert!(additive_running_mean(1.0, 1.0, Mode::Mfg, 1.5).is_err());
        assert!(additive_running_mean(1000.0, 1.0, Mode::Mkv, 999.0).unwrap().is_finite());
    }
}
