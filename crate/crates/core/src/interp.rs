//! Small interpolation and quadrature kernels shared by the ODE solvers.

/// Five-point Gauss–Legendre nodes on [-1, 1].
const GL5_NODES: [f64; 5] = [
    -0.906_179_845_938_664,
    -0.538_469_310_105_683,
    0.0,
    0.538_469_310_105_683,
    0.906_179_845_938_664,
];

const GL5_WEIGHTS: [f64; 5] = [
    0.236_926_885_056_189_1,
    0.478_628_670_499_366_5,
    0.568_888_888_888_888_9,
    0.478_628_670_499_366_5,
    0.236_926_885_056_189_1,
];

/// Integrates `f` over `[lo, hi]` with 5-point Gauss–Legendre (exact for degree ≤ 9).
pub fn gauss5(lo: f64, hi: f64, mut f: impl FnMut(f64) -> f64) -> f64 {
    let half = 0.5 * (hi - lo);
    let mid = 0.5 * (hi + lo);
    GL5_NODES
        .iter()
        .zip(GL5_WEIGHTS.iter())
        .map(|(&x, &w)| w * f(mid + half * x))
        .sum::<f64>()
        * half
}

/// Gauss–Legendre abscissae mapped to `[lo, hi]`, paired with their weights.
pub fn gauss5_points(lo: f64, hi: f64) -> [(f64, f64); 5] {
    let half = 0.5 * (hi - lo);
    let mid = 0.5 * (hi + lo);
    let mut out = [(0.0, 0.0); 5];
    for (slot, (&x, &w)) in out.iter_mut().zip(GL5_NODES.iter().zip(GL5_WEIGHTS.iter())) {
        *slot = (mid + half * x, w * half);
    }
    out
}

/// Value at the midpoint of interval `k` from node samples, fourth-order where
/// four nodes are available.
pub fn midpoint_cubic(values: &[f64], k: usize) -> f64 {
    let n = values.len() - 1;
    debug_assert!(k < n);
    let v = values;
    if n == 1 {
        return 0.5 * (v[0] + v[1]);
    }
    if n == 2 {
        return if k == 0 {
            (3.0 * v[0] + 6.0 * v[1] - v[2]) / 8.0
        } else {
            (-v[0] + 6.0 * v[1] + 3.0 * v[2]) / 8.0
        };
    }
    if k == 0 {
        (5.0 * v[0] + 15.0 * v[1] - 5.0 * v[2] + v[3]) / 16.0
    } else if k == n - 1 {
        (v[n - 3] - 5.0 * v[n - 2] + 15.0 * v[n - 1] + 5.0 * v[n]) / 16.0
    } else {
        (-v[k - 1] + 9.0 * v[k] + 9.0 * v[k + 1] - v[k + 2]) / 16.0
    }
}

/// Cubic Hermite interpolation on an interval of length `h`, `theta ∈ [0, 1]`.
pub fn hermite(y0: f64, d0: f64, y1: f64, d1: f64, h: f64, theta: f64) -> f64 {
    let t = theta;
    let t2 = t * t;
    let t3 = t2 * t;
    let h00 = 2.0 * t3 - 3.0 * t2 + 1.0;
    let h10 = t3 - 2.0 * t2 + t;
    let h01 = -2.0 * t3 + 3.0 * t2;
    let h11 = t3 - t2;
    h00 * y0 + h10 * h * d0 + h01 * y1 + h11 * h * d1
}

/// Quadratic interpolation through (0, y0), (½, ym), (1, y1).
pub fn quadratic3(y0: f64, ym: f64, y1: f64, theta: f64) -> f64 {
    let t = theta;
    y0 * (2.0 * t - 1.0) * (t - 1.0) + ym * 4.0 * t * (1.0 - t) + y1 * t * (2.0 * t - 1.0)
}

/// Solves a tridiagonal system in place (Thomas algorithm).
///
/// `lower[0]` and `upper[n-1]` are ignored. The matrices built by the PDE
/// solvers are diagonally dominant, so no pivoting is needed.
pub fn solve_tridiagonal(lower: &[f64], diag: &[f64], upper: &[f64], rhs: &mut [f64]) {
    let n = diag.len();
    let mut c = vec![0.0; n];
    let mut beta = diag[0];
    c[0] = upper[0] / beta;
    rhs[0] /= beta;
    for i in 1..n {
        beta = diag[i] - lower[i] * c[i - 1];
        if i + 1 < n {
            c[i] = upper[i] / beta;
        }
        rhs[i] = (rhs[i] - lower[i] * rhs[i - 1]) / beta;
    }
    for i in (0..n - 1).rev() {
        rhs[i] -= c[i] * rhs[i + 1];
    }
}
